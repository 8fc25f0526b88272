"""Transformed nonlinear free-boundary system and its outer solvers.

After the front-fixing map, the two phase fields v+- live on fixed
reference domains and satisfy degenerate parabolic equations whose
coefficients depend on the front deviation rho; rho itself satisfies the
latent-heat flux-jump law (see `convention`).  A background state
(w+-, sigma) absorbs the data, and the remaining perturbation
phi = (theta+, theta-, delta) is found by an outer fixed point: each
sweep assembles the right-hand side

    rhs(phi) = Linear(phi) - FullResidual(background + phi)

and solves the linear interface system for the next phi.  At the fixed
point the full nonlinear residual vanishes to discretization accuracy
because Linear uses exactly the frozen coefficients of the linear
solver.  A per-time-step marching mode serves as a practical baseline.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import dataclass, field

from . import convention, fd, geometry, linear_pde, stefan_linear
from .errors import (CompatibilityError, DomainError, LinearSolveFailure,
                     NotDiffeomorphism, OuterNotContracting, ShapeMismatch)


# ---------------------------------------------------------------------------
# data and helpers
# ---------------------------------------------------------------------------

@dataclass
class StefanData:
    """Initial profiles and outer boundary data of the transformed system."""

    geom: geometry.ReferenceGeometry
    params: geometry.Params
    grid_plus: linear_pde.PhaseGrid
    grid_minus: linear_pde.PhaseGrid
    times: np.ndarray
    v0_plus: np.ndarray      # (n_lam, n_omega)
    v0_minus: np.ndarray
    h_plus: np.ndarray       # (n_omega, n_t)
    h_minus: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n_t = self.times.size
        self.v0_plus = np.broadcast_to(
            np.asarray(self.v0_plus, float), self.grid_plus.shape).copy()
        self.v0_minus = np.broadcast_to(
            np.asarray(self.v0_minus, float), self.grid_minus.shape).copy()
        self.h_plus = np.broadcast_to(
            np.asarray(self.h_plus, float),
            (self.grid_plus.n_omega, n_t)).copy()
        self.h_minus = np.broadcast_to(
            np.asarray(self.h_minus, float),
            (self.grid_minus.n_omega, n_t)).copy()
        for v0, grid, sign in ((self.v0_plus, self.grid_plus, 1.0),
                               (self.v0_minus, self.grid_minus, -1.0)):
            if np.any(v0[grid.interface_index] != 0.0):
                raise DomainError("initial profile must vanish on the "
                                  "interface row")
            if np.any(sign * v0 < -1e-12):
                raise DomainError("initial profile has the wrong sign for "
                                  "its phase")

    def grid(self, side):
        return self.grid_plus if side == "+" else self.grid_minus

    def v0(self, side):
        return self.v0_plus if side == "+" else self.v0_minus

    def h(self, side):
        return self.h_plus if side == "+" else self.h_minus


def phi_quotient(values, grid):
    """v / lam with the interface row replaced by the one-sided slope.

    The quotient is smooth across the interface when v vanishes there,
    which makes |v|^alpha = |lam|^alpha |v/lam|^alpha free of 0^alpha
    noise at near-interface nodes.
    """
    lam = grid.lam.copy()
    i = grid.interface_index
    lam[i] = 1.0
    shape = (grid.n_lam,) + (1,) * (values.ndim - 1)
    out = values / lam.reshape(shape)
    out[i] = fd.one_sided_deriv_at(values, grid.h_lam, axis=0,
                                   end=grid.interface_end)
    return out


def abs_v_alpha(values, grid, alpha):
    """|v|^alpha evaluated through the interface-safe quotient."""
    shape = (grid.n_lam,) + (1,) * (values.ndim - 1)
    lam_a = np.abs(grid.lam).reshape(shape) ** alpha
    return lam_a * np.abs(phi_quotient(values, grid)) ** alpha


def flat_laplacian_fd(values, grid):
    """Fixed-domain Laplacian by the module's difference stencils."""
    lap = fd.second_deriv(values, grid.lam, axis=0)
    if grid.kind == "annulus":
        shape = (grid.n_lam,) + (1,) * (values.ndim - 1)
        r = grid.radius().reshape(shape)
        lap = lap + fd.deriv(values, grid.lam, axis=0) / r
        if grid.n_omega > 2:
            lap = lap + fd.periodic_second_deriv(
                values, grid.h_omega, axis=1) / r**2
    elif grid.n_omega > 2:
        lap = lap + fd.second_deriv(values, grid.omega, axis=1)
    return lap


def _extend_stationary(values_omega, geom, grid):
    """Time-independent interface samples extended into one phase."""
    chi = geometry.tube_cutoff(grid.lam, geom.gamma0)
    return chi[:, None] * np.asarray(values_omega, float)[None, :]


# ---------------------------------------------------------------------------
# background construction
# ---------------------------------------------------------------------------

def initial_front_velocity(data):
    """Front speed at t = 0 from the initial flux jump (shared convention)."""
    p = data.params.front_exponent
    sp_ = fd.fitted_interface_slope(data.v0_plus, data.grid_plus.h_lam,
                                    axis=0, end=data.grid_plus.interface_end,
                                    p=p)
    sm = fd.fitted_interface_slope(data.v0_minus, data.grid_minus.h_lam,
                                   axis=0, end=data.grid_minus.interface_end,
                                   p=p)
    jump = data.params.a_plus * sp_ - data.params.a_minus * sm
    return convention.front_speed(jump, data.params.k)


def initial_time_derivative(data, rho1):
    """dv/dt at t = 0 per side: transport by the front plus diffusion.

    rho1 is carried off the interface by the same extension operator the
    front fields use, so the background time slope matches the moving
    front term of the equations exactly at t = 0.
    """
    out = {}
    for side in ("+", "-"):
        grid = data.grid(side)
        v0 = data.v0(side)
        a = data.params.a(side)
        rho1_ext = _extend_stationary(rho1, data.geom, grid)
        v0_lam = fd.deriv(v0, grid.lam, axis=0)
        lap = flat_laplacian_fd(v0, grid)
        out[side] = v0_lam * rho1_ext \
            + a * abs_v_alpha(v0, grid, data.params.alpha) * lap
    return out["+"], out["-"]


def _temporal_cap(times, rho1, gamma0):
    """g(t) with g(0)=0, g'(0)=1, |g| <= gamma0 / max|rho1| saturation.

    Identity below the cap, smooth tanh saturation above; keeps
    sigma = rho1 * g(t) inside the tube for any horizon.
    """
    rmax = float(np.abs(rho1).max())
    t = np.asarray(times, dtype=float)
    if rmax == 0.0:
        return t.copy(), np.ones_like(t)
    t0 = gamma0 / (2.0 * rmax)
    g = np.where(t <= t0, t, t0 * (1.0 + np.tanh((t - t0) / max(t0, 1e-30))))
    gp = np.where(t <= t0, 1.0,
                  1.0 / np.cosh((t - t0) / max(t0, 1e-30)) ** 2)
    return g, gp


@dataclass
class BackgroundState:
    """Data-absorbing state: w matches the initial and boundary data,
    sigma carries the initial front motion; A, B are the frozen
    linearization coefficients derived from w and v0."""

    w_plus: linear_pde.GridField
    w_minus: linear_pde.GridField
    sigma: geometry.InterfaceField
    rho1: np.ndarray
    v1_plus: np.ndarray
    v1_minus: np.ndarray
    A_plus: np.ndarray
    A_minus: np.ndarray
    B_plus: np.ndarray
    B_minus: np.ndarray

    def w(self, side):
        return self.w_plus if side == "+" else self.w_minus

    def A(self, side):
        return self.A_plus if side == "+" else self.A_minus

    def B(self, side):
        return self.B_plus if side == "+" else self.B_minus


def build_background(data, compat_tol=1e-6):
    """Construct (w+-, sigma) absorbing the problem data.

    w = v0 + t v1 plus a correction solved from the frozen degenerate
    equation so the interface and outer Dirichlet rows hold exactly at
    every node; sigma = rho1 * g(t) with the temporal cap g.  Raises
    CompatibilityError when the boundary data disagree with (v0, v1) at
    the corner t = 0 beyond tolerance.
    """
    par = data.params
    rho1 = initial_front_velocity(data)
    v1p, v1m = initial_time_derivative(data, rho1)
    n_t = data.times.size
    out = {}
    for side, v1 in (("+", v1p), ("-", v1m)):
        grid = data.grid(side)
        v0 = data.v0(side)
        h = data.h(side)
        scale = max(1.0, float(np.abs(v0).max()))
        oi = grid.outer_index
        if np.abs(h[:, 0] - v0[oi]).max() > compat_tol * scale:
            raise CompatibilityError(
                f"outer data at t=0 disagrees with the initial profile "
                f"on side {side}")
        if n_t >= 3:
            h_t0 = fd.deriv(h, data.times, axis=1)[:, 0]
            # v1 carries the one-sided boundary truncation of the discrete
            # Laplacian (first order in h); the corner check must admit it
            slope_tol = compat_tol * max(
                1.0, scale / max(data.times[-1], 1e-30)) \
                + 0.05 * grid.h_lam * max(1.0, float(np.abs(v1).max()))
            if np.abs(h_t0 - v1[oi]).max() > slope_tol:
                raise CompatibilityError(
                    f"outer data slope at t=0 disagrees with the initial "
                    f"time derivative on side {side}")
        B = np.clip(np.abs(phi_quotient(v0, grid)) ** par.alpha,
                    par.nu, 1.0 / par.nu)
        weight = np.abs(grid.lam)[:, None, None] ** par.alpha * B[..., None]
        base = v0[..., None] + data.times * v1[..., None]
        corr_prob = linear_pde.DegenerateProblem(
            grid=grid, times=data.times, weight=weight,
            source=np.zeros(grid.shape + (n_t,)),
            interface_data=-base[grid.interface_index],
            outer_data=h - base[oi],
            initial=np.zeros(grid.shape))
        corr = linear_pde.solve_degenerate_dirichlet(corr_prob)
        w_vals = base + corr.values
        out[side] = {
            "w": linear_pde.GridField(grid=grid, times=data.times,
                                      values=w_vals),
            "A": fd.deriv(w_vals, grid.lam, axis=0),
            "B": np.broadcast_to(B[..., None], grid.shape + (n_t,)).copy(),
        }
    g, gp = _temporal_cap(data.times, rho1, data.geom.gamma0)
    sigma = geometry.InterfaceField(
        rho=rho1[:, None] * g[None, :],
        omega=data.geom.omega_nodes(data.grid_plus.n_omega),
        times=data.times,
        rho_t=rho1[:, None] * gp[None, :])
    return BackgroundState(
        w_plus=out["+"]["w"], w_minus=out["-"]["w"], sigma=sigma,
        rho1=rho1, v1_plus=v1p, v1_minus=v1m,
        A_plus=out["+"]["A"], A_minus=out["-"]["A"],
        B_plus=out["+"]["B"], B_minus=out["-"]["B"])


# ---------------------------------------------------------------------------
# residual evaluation
# ---------------------------------------------------------------------------

@dataclass
class Perturbation:
    theta_plus: linear_pde.GridField
    theta_minus: linear_pde.GridField
    delta: geometry.InterfaceField

    def theta(self, side):
        return self.theta_plus if side == "+" else self.theta_minus

    def sup(self):
        return max(float(np.abs(self.theta_plus.values).max()),
                   float(np.abs(self.theta_minus.values).max()),
                   float(np.abs(self.delta.rho).max()))


def zero_perturbation(data):
    n_t = data.times.size
    mk = lambda grid: linear_pde.GridField(
        grid=grid, times=data.times, values=np.zeros(grid.shape + (n_t,)))
    om = data.geom.omega_nodes(data.grid_plus.n_omega)
    delta = geometry.InterfaceField(rho=np.zeros((om.size, n_t)), omega=om,
                                    times=data.times,
                                    rho_t=np.zeros((om.size, n_t)))
    return Perturbation(theta_plus=mk(data.grid_plus),
                        theta_minus=mk(data.grid_minus), delta=delta)


@dataclass
class NonlinearResidual:
    """Interior and interface defects of a candidate (v+-, rho)."""

    R_pde_plus: np.ndarray
    R_pde_minus: np.ndarray
    R_stefan: np.ndarray
    flux_jump: np.ndarray
    s_factor: np.ndarray
    rho_lam_iface: np.ndarray

    def interior_sup(self, grid_plus, grid_minus):
        """Sup over non-boundary rows of the two phase defects."""
        best = 0.0
        for R, grid in ((self.R_pde_plus, grid_plus),
                        (self.R_pde_minus, grid_minus)):
            mask = ~grid.boundary_mask()
            best = max(best, float(np.abs(R[mask]).max()))
        return best


def _pullback_laplacian(values, rho_ext, grid):
    """Nested-difference Laplacian in the front-fitted coordinates."""
    one_plus = 1.0 + rho_ext.d_lam()
    if one_plus.min() <= 0.0:
        raise NotDiffeomorphism("1 + rho_lam must stay positive")

    def d_lam(f):
        return fd.deriv(f, grid.lam, axis=0) / one_plus

    dl = d_lam(values)
    lap = d_lam(dl)
    if grid.kind == "annulus":
        rho_om = rho_ext.d_omega()

        def d_om(f):
            f_om = fd.periodic_deriv(f, grid.h_omega, axis=1) \
                if grid.n_omega > 2 else np.zeros_like(f)
            return f_om - fd.deriv(f, grid.lam, axis=0) * rho_om / one_plus

        r_y = grid.radius()[:, None, None] + rho_ext.values
        lap = lap + dl / r_y + d_om(d_om(values)) / r_y**2
    return lap, one_plus


def nonlinear_residual(v_plus, v_minus, rho, data):
    """Defects of the transformed equations at a candidate state.

    The phase defect is v_t - h_rho rhoE_t - |v|^alpha Lap_rho v with the
    moving-coordinate transport term h_rho = v_lam / (1 + rho_lam); the
    interface defect is the flux-jump law through the shared convention
    helper.  Boundary rows carry Dirichlet data and are not meaningful.
    """
    par = data.params
    rho.check_invariants(data.geom)
    R_pde = {}
    iface_dlam = {}
    for side, v in (("+", v_plus), ("-", v_minus)):
        grid = data.grid(side)
        rho_ext = geometry.extend_interface_field(rho, data.geom, side,
                                                  grid=grid)
        report = geometry.check_diffeomorphism(rho_ext)
        if not report.passed:
            raise NotDiffeomorphism(report.reason)
        lap, one_plus = _pullback_laplacian(v.values, rho_ext, grid)
        v_t = fd.deriv(v.values, data.times, axis=2) \
            if data.times.size >= 3 else np.zeros_like(v.values)
        v_lam = fd.deriv(v.values, grid.lam, axis=0)
        h_rho = v_lam / one_plus
        weight = abs_v_alpha(v.values, grid, par.alpha)
        R_pde[side] = v_t - h_rho * rho_ext.d_t() - weight * lap
        iface_dlam[side] = rho_ext.d_lam()[grid.interface_index]
    pexp = par.front_exponent
    flux_jump = par.a_plus * v_plus.interface_normal_deriv(p=pexp) \
        - par.a_minus * v_minus.interface_normal_deriv(p=pexp)
    rho_lam = 0.5 * (iface_dlam["+"] + iface_dlam["-"])
    omega = data.geom.omega_nodes(rho.n_omega)
    if data.geom.kind == "annulus2d" and rho.n_omega > 2:
        rho_om = fd.periodic_deriv(rho.rho, 2.0 * np.pi / rho.n_omega, axis=0)
    else:
        rho_om = np.zeros_like(rho.rho)
    s_factor = geometry.stefan_geometric_factor(
        rho_lam, rho_om, omega[:, None], 0.0, data.geom, rho=rho.rho)
    R_stefan = convention.stefan_residual(
        flux_jump, rho.rho_t, par.k, s_factor=s_factor,
        one_plus_rho_lam=1.0 + rho_lam)
    return NonlinearResidual(
        R_pde_plus=R_pde["+"], R_pde_minus=R_pde["-"], R_stefan=R_stefan,
        flux_jump=flux_jump, s_factor=np.asarray(s_factor, dtype=float),
        rho_lam_iface=rho_lam)


@dataclass
class ResidualBundle:
    """Right-hand sides for one outer sweep, with the interface pieces
    evaluated both ways (operator difference and direct formulas)."""

    f1_plus: np.ndarray
    f1_minus: np.ndarray
    f2: np.ndarray
    F3: np.ndarray
    F4: np.ndarray
    cross_check_error: float
    sup_f1: float
    sup_f2: float


def _combined_front(bg, phi):
    sigma, delta = bg.sigma, phi.delta
    return geometry.InterfaceField(rho=sigma.rho + delta.rho,
                                   omega=sigma.omega, times=sigma.times,
                                   rho_t=sigma.rho_t + delta.rho_t)


def linearized_rhs(phi, bg, data, eps=0.0):
    """Assemble rhs(phi) = Linear(phi) - FullResidual(background + phi).

    Linear uses the frozen coefficients (A = dw/dlam, B from v0) and the
    same coupling stencils as the linear interface solver, so solving the
    linear system with this rhs drives the nonlinear residual to zero at
    the fixed point.  The interface rhs is additionally rebuilt from the
    direct quadratic formulas; both evaluations must agree to rounding.
    """
    par = data.params
    rho = _combined_front(bg, phi)
    v_plus = linear_pde.GridField(
        grid=data.grid_plus, times=data.times,
        values=bg.w_plus.values + phi.theta_plus.values)
    v_minus = linear_pde.GridField(
        grid=data.grid_minus, times=data.times,
        values=bg.w_minus.values + phi.theta_minus.values)
    nres = nonlinear_residual(v_plus, v_minus, rho, data)

    f1 = {}
    delta_dlam = {}
    n_t = data.times.size
    for side in ("+", "-"):
        grid = data.grid(side)
        theta = phi.theta(side).values
        weight = np.abs(grid.lam)[:, None, None] ** par.alpha * bg.B(side)
        lap = linear_pde.laplacian_matrix(grid)

        def lap_apply(f):
            out = np.empty_like(f)
            for n in range(n_t):
                out[..., n] = (lap @ f[..., n].reshape(-1)) \
                    .reshape(grid.shape)
            return out

        theta_t = fd.deriv(theta, data.times, axis=2) if n_t >= 3 \
            else np.zeros_like(theta)
        de = geometry.extend_interface_field(phi.delta, data.geom, side,
                                             grid=grid)
        de_t = fd.deriv(de.values, data.times, axis=2) if n_t >= 3 \
            else np.zeros_like(de.values)
        lin = theta_t - weight * lap_apply(theta) \
            - bg.A(side) * (de_t - weight * lap_apply(de.values))
        R = nres.R_pde_plus if side == "+" else nres.R_pde_minus
        f1[side] = lin - R
        f1[side][grid.boundary_mask()] = 0.0
        delta_dlam[side] = fd.one_sided_deriv_at(
            de.values, grid.h_lam, axis=0, end=grid.interface_end)

    # interface: operator-difference evaluation
    ip = data.grid_plus.interface_index
    im = data.grid_minus.interface_index
    pexp = par.front_exponent
    jump_theta = par.a_plus * phi.theta_plus.interface_normal_deriv(p=pexp) \
        - par.a_minus * phi.theta_minus.interface_normal_deriv(p=pexp)
    d_lam = 0.5 * (delta_dlam["+"] + delta_dlam["-"])
    A_jump = par.a_plus * bg.A_plus[ip] - par.a_minus * bg.A_minus[im]
    beltrami = stefan_linear.laplace_beltrami(phi.delta.rho, data.geom)
    lin_int = par.k * phi.delta.rho_t - eps * beltrami \
        + jump_theta - d_lam * A_jump
    f2 = lin_int - nres.R_stefan

    # interface: direct quadratic formulas
    jump_w = par.a_plus * bg.w_plus.interface_normal_deriv(p=pexp) \
        - par.a_minus * bg.w_minus.interface_normal_deriv(p=pexp)
    jump_v = nres.flux_jump
    sigma_lam = nres.rho_lam_iface - d_lam
    S = nres.s_factor
    F3 = -(S - 1.0) * jump_v \
        - (par.k * bg.sigma.rho_t + jump_w) * (1.0 + d_lam) \
        - par.k * rho.rho_t * sigma_lam
    F4 = -par.k * phi.delta.rho_t * d_lam
    direct = F3 + F4 - eps * beltrami
    scale = max(1.0, float(np.abs(f2).max()))
    cross = float(np.abs(direct - f2).max()) / scale
    return ResidualBundle(
        f1_plus=f1["+"], f1_minus=f1["-"], f2=f2, F3=F3, F4=F4,
        cross_check_error=cross,
        sup_f1=max(float(np.abs(f1["+"]).max()),
                   float(np.abs(f1["-"]).max())),
        sup_f2=float(np.abs(f2).max()))


# ---------------------------------------------------------------------------
# outer solvers
# ---------------------------------------------------------------------------

@dataclass
class OuterSolution:
    v_plus: linear_pde.GridField
    v_minus: linear_pde.GridField
    rho: geometry.InterfaceField
    mode: str
    background: BackgroundState | None = None
    iterations: list = field(default_factory=list)
    # entries: (iter, update, q, rhs_sup, cross_check_error)

    def contraction_factors(self):
        return [q for _, _, q, _, _ in self.iterations if q == q]

    def rhs_history(self):
        return [r for _, _, _, r, _ in self.iterations]


def _solve_paper_faithful(data, eps, tol, max_outer, inner_tol,
                          inner_max_iter, ball_guard):
    bg = build_background(data)
    guard = data.geom.gamma0 / 4.0 if ball_guard is None else ball_guard
    phi = zero_perturbation(data)
    log = []
    prev_update = np.nan
    bad = 0
    for it in range(1, max_outer + 1):
        bundle = linearized_rhs(phi, bg, data, eps=eps)
        p = stefan_linear.LinearStefanProblem(
            geom=data.geom, params=data.params,
            grid_plus=data.grid_plus, grid_minus=data.grid_minus,
            times=data.times,
            A_plus=bg.A_plus, A_minus=bg.A_minus,
            B_plus=bg.B_plus, B_minus=bg.B_minus,
            f1_plus=bundle.f1_plus, f1_minus=bundle.f1_minus,
            f2=bundle.f2, eps=eps)
        sol = stefan_linear.solve_linear_stefan(p, tol=inner_tol,
                                                max_iter=inner_max_iter)
        new_phi = Perturbation(theta_plus=sol.v_plus,
                               theta_minus=sol.v_minus, delta=sol.delta)
        update = max(
            float(np.abs(new_phi.theta_plus.values
                         - phi.theta_plus.values).max()),
            float(np.abs(new_phi.theta_minus.values
                         - phi.theta_minus.values).max()),
            float(np.abs(new_phi.delta.rho - phi.delta.rho).max()))
        q = update / prev_update if prev_update == prev_update \
            and prev_update > 0.0 else np.nan
        log.append((it, update, q, max(bundle.sup_f1, bundle.sup_f2),
                    bundle.cross_check_error))
        phi = new_phi
        if float(np.abs(phi.delta.rho).max()) > guard:
            raise OuterNotContracting(
                "front correction left the trust ball; shrink the horizon")
        if update < tol:
            break
        if q == q and q >= 1.0:
            bad += 1
            if bad >= 3:
                raise OuterNotContracting(
                    "outer updates stopped contracting; shrink the horizon")
        else:
            bad = 0
        prev_update = update
    else:
        raise OuterNotContracting("outer iteration budget exhausted")
    rho = _combined_front(bg, phi)
    v_plus = linear_pde.GridField(
        grid=data.grid_plus, times=data.times,
        values=bg.w_plus.values + phi.theta_plus.values)
    v_minus = linear_pde.GridField(
        grid=data.grid_minus, times=data.times,
        values=bg.w_minus.values + phi.theta_minus.values)
    return OuterSolution(v_plus=v_plus, v_minus=v_minus, rho=rho,
                         mode="paper_faithful", background=bg,
                         iterations=log)


def _flux_form_matrix(grid, one_plus):
    """Tridiagonal (1/j) d/dlam ((1/j) d/dlam .) with j = 1 + rho_lam."""
    b = 1.0 / one_plus
    h = grid.h_lam
    n = grid.n_lam
    bh = 0.5 * (b[:-1] + b[1:])
    lower = b[1:] * bh / h**2
    upper = b[:-1] * bh / h**2
    main = np.zeros(n)
    main[:-1] -= b[:-1] * bh / h**2
    main[1:] -= b[1:] * bh / h**2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def _d1_matrix(n, h):
    off = np.ones(n - 1) / (2.0 * h)
    m = sp.diags([-off, off], [-1, 1], format="lil")
    m[0, 0], m[0, 1], m[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    m[-1, -1], m[-1, -2], m[-1, -3] = 1.5 / h, -2.0 / h, 0.5 / h
    return sp.csr_matrix(m)


def _degenerate_stencil(j, p, order):
    """Derivative weights near a degenerate front, in units of the spacing.

    Returns the four weights w such that sum w_i f(i h) equals the
    derivative of the given order (1 or 2) of f at j h, exactly for
    f in span{1, d, d**p, d**2} (d the distance from the interface).
    Centered stencils carry an O(1) weighted truncation error on the
    d**p front profile at the node nearest the interface; these rows
    remove it.  Scale by 1/h**order for an actual spacing h.
    """
    d = np.arange(4.0)
    A = np.vstack([np.ones(4), d, d**p, d**2])
    if order == 1:
        b = np.array([0.0, 1.0, p * float(j) ** (p - 1.0), 2.0 * j])
    else:
        b = np.array([0.0, 0.0, p * (p - 1.0) * float(j) ** (p - 2.0), 2.0])
    return np.linalg.solve(A, b)


def _solve_marching(data):
    """Per-time-step baseline on the segment: explicit front update from
    the flux law, then a semi-implicit field step in the fitted metric."""
    if data.geom.kind != "segment1d":
        raise DomainError("marching mode is implemented for segment1d only")
    par = data.params
    n_t = data.times.size
    v = {s: np.zeros(data.grid(s).shape + (n_t,)) for s in ("+", "-")}
    for s in ("+", "-"):
        v[s][..., 0] = data.v0(s)
    rho = np.zeros((1, n_t))
    rho_t = np.zeros((1, n_t))
    for n in range(1, n_t):
        dt = data.times[n] - data.times[n - 1]
        slopes = {}
        for s in ("+", "-"):
            grid = data.grid(s)
            slopes[s] = fd.fitted_interface_slope(
                v[s][..., n - 1], grid.h_lam, axis=0,
                end=grid.interface_end, p=par.front_exponent)
        jump = par.a_plus * slopes["+"] - par.a_minus * slopes["-"]
        ext_prev = {s: _extend_stationary(rho[:, n - 1], data.geom,
                                          data.grid(s))
                    for s in ("+", "-")}
        rl = 0.5 * sum(
            fd.one_sided_deriv_at(ext_prev[s], data.grid(s).h_lam, axis=0,
                                  end=data.grid(s).interface_end)
            for s in ("+", "-"))
        rho_t[:, n] = convention.front_speed(
            jump, par.k, one_plus_rho_lam=1.0 + rl)
        rho[:, n] = rho[:, n - 1] + dt * rho_t[:, n]
        if np.abs(rho[:, n]).max() > 2.0 * data.geom.gamma0:
            raise NotDiffeomorphism("front left the tube during marching")
        for s in ("+", "-"):
            grid = data.grid(s)
            ext = _extend_stationary(rho[:, n], data.geom, grid)
            ext_t = _extend_stationary(rho_t[:, n], data.geom, grid)
            one_plus = 1.0 + fd.deriv(ext, grid.lam, axis=0)[:, 0]
            if one_plus.min() <= geometry.THETA_MIN:
                raise NotDiffeomorphism("fold during marching")
            weight = abs_v_alpha(v[s][..., n - 1], grid, par.alpha)[:, 0]
            adv = ext_t[:, 0] / one_plus
            op = sp.diags(weight) @ _flux_form_matrix(grid, one_plus) \
                + sp.diags(adv) @ _d1_matrix(grid.n_lam, grid.h_lam)
            step = (sp.identity(grid.n_lam, format="csr") / dt - op).tolil()
            ii, oi = grid.interface_index, grid.outer_index
            for b in (ii, oi):
                step.rows[b] = [b]
                step.data[b] = [1.0]
            # near the front the profile behaves like d**(1+1/m); swap in
            # stencils exact on that shape where the cutoff is still flat
            if 3.0 * grid.h_lam < data.geom.gamma0 / 2.0:
                h = grid.h_lam
                for j in (1, 2):
                    c2 = _degenerate_stencil(j, par.front_exponent, 2) / h**2
                    c1 = _degenerate_stencil(j, par.front_exponent, 1) / h
                    if grid.interface_end == "first":
                        idx = j
                        cols = [0, 1, 2, 3]
                        s1 = 1.0
                    else:
                        idx = grid.n_lam - 1 - j
                        cols = [grid.n_lam - 1 - i for i in range(4)]
                        s1 = -1.0
                    row = weight[idx] * c2 + adv[idx] * s1 * c1
                    entries = sorted(
                        (col, -row[i] + (1.0 / dt if col == idx else 0.0))
                        for i, col in enumerate(cols))
                    step.rows[idx] = [c for c, _ in entries]
                    step.data[idx] = [val for _, val in entries]
            rhs = v[s][:, 0, n - 1] / dt
            rhs[ii] = 0.0
            rhs[oi] = data.h(s)[0, n]
            try:
                sol = spla.spsolve(step.tocsc(), rhs)
            except RuntimeError as exc:
                raise LinearSolveFailure(str(exc)) from exc
            if not np.all(np.isfinite(sol)):
                raise LinearSolveFailure(f"non-finite field at step {n}")
            v[s][:, 0, n] = sol
    om = data.geom.omega_nodes(1)
    return OuterSolution(
        v_plus=linear_pde.GridField(grid=data.grid_plus, times=data.times,
                                    values=v["+"]),
        v_minus=linear_pde.GridField(grid=data.grid_minus, times=data.times,
                                     values=v["-"]),
        rho=geometry.InterfaceField(rho=rho, omega=om, times=data.times,
                                    rho_t=rho_t),
        mode="marching")


def outer_solve(data, mode="paper_faithful", eps=0.0, tol=1e-7,
                max_outer=60, inner_tol=1e-8, inner_max_iter=80,
                ball_guard=None):
    """Solve the transformed free-boundary system on one horizon.

    paper_faithful iterates the linearized interface system to a fixed
    point of the perturbation; marching advances the front explicitly
    step by step.  Both return the combined fields and front.
    """
    if mode == "paper_faithful":
        return _solve_paper_faithful(data, eps, tol, max_outer, inner_tol,
                                     inner_max_iter, ball_guard)
    if mode == "marching":
        return _solve_marching(data)
    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# return to physical variables
# ---------------------------------------------------------------------------

@dataclass
class PhysicalState:
    u_plus: linear_pde.GridField
    u_minus: linear_pde.GridField
    front: np.ndarray    # (n_omega, n_t) physical front coordinate


def to_physical(v_plus, v_minus, rho, params, geom):
    """Sign-preserving m-th root and the physical front locus.

    u = |v|^(1/m - 1) v; the front is the image of the reference
    interface under the displacement by rho (normal coordinate for the
    segment, radius for the annulus).
    """
    def root(gf):
        vals = np.sign(gf.values) * np.abs(gf.values) ** (1.0 / params.m)
        return linear_pde.GridField(grid=gf.grid, times=gf.times,
                                    values=vals)

    front = rho.rho.copy()
    if geom.kind == "annulus2d":
        front = geom.R + front
    return PhysicalState(u_plus=root(v_plus), u_minus=root(v_minus),
                         front=front)
