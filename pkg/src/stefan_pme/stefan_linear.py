"""Coupled linear interface system solved by an inner fixed point.

The unknowns are two phase fields v+- and a front correction delta.  The
phase fields satisfy degenerate parabolic equations driven by volume
sources plus a coupling term built from the extension of delta; delta
satisfies a first-order-in-time equation on the interface, optionally
regularized by eps times the Laplace-Beltrami operator, driven by the
interface source minus the flux jump of the phase fields.

One application of the operator M solves the phase equations for a given
delta and then integrates the front equation; the solver iterates
delta -> M delta from zero and logs contraction factors.  When three
consecutive factors reach 1 the horizon is deemed too large and the
solve restarts on recursively halved time slabs.
"""

import io
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fd, geometry, hoelder, linear_pde
from .errors import DegenerateInput, DomainError, NotContracting

SLAB_HALVING_LIMIT = 8


@dataclass
class LinearStefanProblem:
    """Data of the linearized interface system on one time horizon.

    A and B are frozen coefficient fields per side; f1 are the volume
    sources, f2 the interface source.  All fields broadcast to the full
    (n_lam, n_omega, n_t) and (n_omega, n_t) shapes.  Nonzero initial
    states support restarting on time slabs.
    """

    geom: geometry.ReferenceGeometry
    params: geometry.Params
    grid_plus: linear_pde.PhaseGrid
    grid_minus: linear_pde.PhaseGrid
    times: np.ndarray
    A_plus: np.ndarray = 1.0
    A_minus: np.ndarray = 1.0
    B_plus: np.ndarray = 1.0
    B_minus: np.ndarray = 1.0
    f1_plus: np.ndarray = 0.0
    f1_minus: np.ndarray = 0.0
    f2: np.ndarray = 0.0
    eps: float | None = None
    initial_v_plus: np.ndarray | None = None
    initial_v_minus: np.ndarray | None = None
    initial_delta: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n_t = self.times.size
        for name, grid in (("A_plus", self.grid_plus),
                           ("A_minus", self.grid_minus),
                           ("B_plus", self.grid_plus),
                           ("B_minus", self.grid_minus),
                           ("f1_plus", self.grid_plus),
                           ("f1_minus", self.grid_minus)):
            shape = grid.shape + (n_t,)
            setattr(self, name, np.broadcast_to(
                np.asarray(getattr(self, name), float), shape).copy())
        self.f2 = np.broadcast_to(
            np.asarray(self.f2, float),
            (self.grid_plus.n_omega, n_t)).copy()
        if self.eps is None:
            self.eps = self.params.eps
        nu = self.params.nu
        for B in (self.B_plus, self.B_minus):
            if B.min() < nu - 1e-12 or B.max() > 1.0 / nu + 1e-12:
                raise DomainError(
                    "coefficient B outside the [nu, 1/nu] bounds")
        if self.initial_v_plus is None:
            self.initial_v_plus = np.zeros(self.grid_plus.shape)
        if self.initial_v_minus is None:
            self.initial_v_minus = np.zeros(self.grid_minus.shape)
        if self.initial_delta is None:
            self.initial_delta = np.zeros(self.grid_plus.n_omega)

    @property
    def n_omega(self):
        return self.grid_plus.n_omega

    def grid(self, side):
        return self.grid_plus if side == "+" else self.grid_minus

    def weight(self, side):
        """Degenerate diffusion weight |lam|^alpha * B per side."""
        g = self.grid(side)
        B = self.B_plus if side == "+" else self.B_minus
        return np.abs(g.lam)[:, None, None] ** self.params.alpha * B

    def time_slab(self, lo, hi, v_plus0=None, v_minus0=None, delta0=None):
        """Sub-problem on times[lo:hi+1] with overriding initial states."""
        sl = slice(lo, hi + 1)
        return replace(
            self,
            times=self.times[sl],
            A_plus=self.A_plus[..., sl], A_minus=self.A_minus[..., sl],
            B_plus=self.B_plus[..., sl], B_minus=self.B_minus[..., sl],
            f1_plus=self.f1_plus[..., sl], f1_minus=self.f1_minus[..., sl],
            f2=self.f2[..., sl],
            initial_v_plus=self.initial_v_plus if v_plus0 is None else v_plus0,
            initial_v_minus=self.initial_v_minus if v_minus0 is None
            else v_minus0,
            initial_delta=self.initial_delta if delta0 is None else delta0,
        )


@dataclass
class LinearStefanSolution:
    v_plus: linear_pde.GridField
    v_minus: linear_pde.GridField
    delta: geometry.InterfaceField
    iterations: list = field(default_factory=list)  # (iter, update, q)
    slabs: int = 1

    def log_csv(self):
        buf = io.StringIO()
        buf.write("iter,update_norm,q_n\n")
        for it, upd, q in self.iterations:
            qtxt = f"{q:.17g}" if q == q else "nan"
            buf.write(f"{it},{upd:.17g},{qtxt}\n")
        return buf.getvalue()

    def contraction_factors(self):
        return [q for _, _, q in self.iterations if q == q]


def laplace_beltrami(delta_values, geom):
    """Surface Laplacian of interface samples: (1/R^2) d2/domega2.

    Zero on the segment, whose interface is a single point.  Accepts
    (n_omega,) or (n_omega, n_t) arrays.
    """
    vals = np.asarray(delta_values, dtype=float)
    n_omega = vals.shape[0]
    if geom.kind == "segment1d" or n_omega < 3:
        return np.zeros_like(vals)
    h = 2.0 * np.pi / n_omega
    return fd.periodic_second_deriv(vals, h, axis=0) / geom.R**2


def _beltrami_matrix(n_omega, R):
    h = 2.0 * np.pi / n_omega
    main = np.full(n_omega, -2.0)
    off = np.ones(n_omega - 1)
    m = sp.diags([off, main, off], [-1, 0, 1], format="lil") / h**2
    m[0, -1] = 1.0 / h**2
    m[-1, 0] = 1.0 / h**2
    return sp.csr_matrix(m) / R**2


def _integrate_front(rhs, p):
    """Backward-Euler integration of k u_t - eps Lap_Gamma u = rhs.

    Returns (u, u_t) with u_t recovered from the equation itself, so the
    pair satisfies the discrete front law exactly.
    """
    k = p.params.k
    n_omega, n_t = rhs.shape
    use_beltrami = (p.eps > 0.0 and p.geom.kind == "annulus2d"
                    and n_omega >= 3)
    L = _beltrami_matrix(n_omega, p.geom.R) * p.eps if use_beltrami else None
    u = np.empty((n_omega, n_t))
    u_t = np.empty((n_omega, n_t))
    u[:, 0] = p.initial_delta
    u_t[:, 0] = (rhs[:, 0] + (L @ u[:, 0] if L is not None else 0.0)) / k
    for n in range(1, n_t):
        dt = p.times[n] - p.times[n - 1]
        if L is None:
            u[:, n] = u[:, n - 1] + dt * rhs[:, n] / k
        else:
            mat = sp.identity(n_omega, format="csc") * (k / dt) - L
            u[:, n] = spla.spsolve(mat, (k / dt) * u[:, n - 1] + rhs[:, n])
        u_t[:, n] = (rhs[:, n] + (L @ u[:, n] if L is not None else 0.0)) / k
    return u, u_t


def _solve_phase(p, side, delta):
    """Phase solve for a given front iterate: step 1 of the operator M."""
    grid = p.grid(side)
    A = p.A_plus if side == "+" else p.A_minus
    f1 = p.f1_plus if side == "+" else p.f1_minus
    initial = p.initial_v_plus if side == "+" else p.initial_v_minus
    weight = p.weight(side)
    delta_ext = geometry.extend_interface_field(delta, p.geom, side,
                                                grid=grid)
    lap = linear_pde.laplacian_matrix(grid)
    n_t = p.times.size
    lap_de = np.empty(grid.shape + (n_t,))
    for n in range(n_t):
        lap_de[..., n] = (lap @ delta_ext.values[..., n].reshape(-1)) \
            .reshape(grid.shape)
    de_t = fd.deriv(delta_ext.values, p.times, axis=2) if n_t >= 3 \
        else np.zeros_like(delta_ext.values)
    source = f1 + A * (de_t - weight * lap_de)
    prob = linear_pde.DegenerateProblem(
        grid=grid, times=p.times, weight=weight, source=source,
        interface_data=np.zeros((grid.n_omega, n_t)),
        outer_data=np.zeros((grid.n_omega, n_t)),
        initial=initial)
    return linear_pde.solve_degenerate_dirichlet(prob), delta_ext


def apply_M(delta, p):
    """One application of the inner operator: phase solves + front update."""
    v_plus, de_plus = _solve_phase(p, "+", delta)
    v_minus, de_minus = _solve_phase(p, "-", delta)
    a_p, a_m = p.params.a_plus, p.params.a_minus
    pexp = p.params.front_exponent
    flux_jump = a_p * v_plus.interface_normal_deriv(p=pexp) \
        - a_m * v_minus.interface_normal_deriv(p=pexp)
    ip, im = p.grid_plus.interface_index, p.grid_minus.interface_index
    dlam_p = fd.one_sided_deriv_at(de_plus.values, p.grid_plus.h_lam,
                                   axis=0, end=p.grid_plus.interface_end)
    dlam_m = fd.one_sided_deriv_at(de_minus.values, p.grid_minus.h_lam,
                                   axis=0, end=p.grid_minus.interface_end)
    # one front slope shared by both flux terms: mean of the two
    # side extensions, so the outer residual algebra cancels exactly
    dlam = 0.5 * (dlam_p + dlam_m)
    rhs = p.f2 - flux_jump \
        + dlam * (a_p * p.A_plus[ip] - a_m * p.A_minus[im])
    u, u_t = _integrate_front(rhs, p)
    m_delta = geometry.InterfaceField(rho=u, omega=delta.omega,
                                      times=p.times, rho_t=u_t)
    return m_delta, v_plus, v_minus


def _zero_delta(p):
    om = p.geom.omega_nodes(p.n_omega)
    rho = np.repeat(p.initial_delta[:, None], p.times.size, axis=1)
    return geometry.InterfaceField(rho=rho, omega=om, times=p.times,
                                   rho_t=np.zeros_like(rho))


def _fixed_point(p, tol, max_iter):
    delta = _zero_delta(p)
    log = []
    prev_update = np.nan
    bad = 0
    v_plus = v_minus = None
    for it in range(1, max_iter + 1):
        new_delta, v_plus, v_minus = apply_M(delta, p)
        update = float(np.abs(new_delta.rho - delta.rho).max())
        q = update / prev_update if prev_update == prev_update \
            and prev_update > 0.0 else np.nan
        log.append((it, update, q))
        delta = new_delta
        if update < tol:
            return LinearStefanSolution(v_plus=v_plus, v_minus=v_minus,
                                        delta=delta, iterations=log)
        if q == q and q >= 1.0:
            bad += 1
            if bad >= 3:
                raise NotContracting(
                    f"contraction factor >= 1 for {bad} consecutive sweeps")
        else:
            bad = 0
        prev_update = update
    raise NotContracting(f"no convergence in {max_iter} sweeps")


def _concat_solutions(first, second):
    """Join two consecutive slab solutions, dropping the shared time node."""
    times = np.concatenate([first.v_plus.times, second.v_plus.times[1:]])

    def join_field(a, b):
        vals = np.concatenate([a.values, b.values[..., 1:]], axis=-1)
        return linear_pde.GridField(grid=a.grid, times=times, values=vals)

    delta = geometry.InterfaceField(
        rho=np.concatenate([first.delta.rho, second.delta.rho[:, 1:]],
                           axis=1),
        omega=first.delta.omega, times=times,
        rho_t=np.concatenate([first.delta.rho_t, second.delta.rho_t[:, 1:]],
                             axis=1))
    return LinearStefanSolution(
        v_plus=join_field(first.v_plus, second.v_plus),
        v_minus=join_field(first.v_minus, second.v_minus),
        delta=delta,
        iterations=first.iterations + second.iterations,
        slabs=first.slabs + second.slabs)


def solve_linear_stefan(p, tol=1e-8, max_iter=50, _depth=0):
    """Fixed-point solve of the linear interface system.

    Iterates delta -> M delta from the initial front state until the
    sup-norm update drops below tol.  On persistent non-contraction the
    horizon is halved and the two halves are solved in sequence, the
    second starting from the first's terminal state; recursion depth is
    capped at SLAB_HALVING_LIMIT.
    """
    try:
        return _fixed_point(p, tol, max_iter)
    except NotContracting:
        if _depth >= SLAB_HALVING_LIMIT or p.times.size < 3:
            raise
        mid = p.times.size // 2
        first = solve_linear_stefan(p.time_slab(0, mid), tol, max_iter,
                                    _depth + 1)
        second_p = p.time_slab(
            mid, p.times.size - 1,
            v_plus0=first.v_plus.values[..., -1],
            v_minus0=first.v_minus.values[..., -1],
            delta0=first.delta.rho[:, -1])
        second = solve_linear_stefan(second_p, tol, max_iter, _depth + 1)
        return _concat_solutions(first, second)


def _sampled_from_field(gf):
    """Reshape a phase field for the slab-norm estimators (x_N = |lam|)."""
    vals = np.moveaxis(gf.values, 1, 0)   # (n_omega, n_lam, n_t)
    lam = gf.grid.lam
    if gf.grid.interface_end == "last":
        vals = vals[:, ::-1, :]
        x_N = -lam[::-1]
    else:
        x_N = lam.copy()
    x_prime = gf.grid.omega if gf.grid.n_omega > 1 else np.zeros(1)
    return hoelder.SampledFunction(values=vals.copy(), x_prime=x_prime,
                                   x_N=x_N, times=gf.times)


def _field_norm(gf, gamma, alpha):
    f = _sampled_from_field(gf)
    return (float(np.abs(f.values).max())
            + hoelder.seminorm_Hs(f, gamma, alpha)
            + hoelder.time_holder(f, gamma / 2.0))


def measure_schauder_ratio(sol, p):
    """Solution-to-data norm ratio, a stability diagnostic.

    Numerator: weighted Hölder blocks of the two phase fields plus the
    parabolic front norm of delta.  Denominator: the same estimators
    applied to the data (f1+-, f2).  The ratio is meaningful only in
    comparisons across refinements or across eps, never in isolation.
    """
    par = p.params
    gamma, alpha = par.gamma, par.alpha
    lhs = _field_norm(sol.v_plus, gamma, alpha) \
        + _field_norm(sol.v_minus, gamma, alpha) \
        + hoelder.interface_parabolic_norm(
            sol.delta, par.beta, alpha,
            periodic=p.geom.kind == "annulus2d")
    data = 0.0
    for f1, grid in ((p.f1_plus, p.grid_plus), (p.f1_minus, p.grid_minus)):
        gf = linear_pde.GridField(grid=grid, times=p.times, values=f1)
        data += _field_norm(gf, gamma, alpha)
    f2 = geometry.InterfaceField(rho=p.f2, omega=p.geom.omega_nodes(p.n_omega),
                                 times=p.times)
    data += float(np.abs(p.f2).max()) + hoelder.interface_parabolic_norm(
        f2, par.beta, alpha, periodic=p.geom.kind == "annulus2d")
    if data == 0.0:
        raise DegenerateInput("zero data: Schauder ratio undefined")
    return lhs / data
