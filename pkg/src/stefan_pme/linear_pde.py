"""Scalar degenerate-parabolic solver on fixed one-phase domains.

The engine is backward Euler in time with a second-order centered
Laplacian in space.  The diffusion weight may vanish on the interface
row, where a Dirichlet row replaces the PDE, so no interior division by
zero arises and the step matrix stays an M-matrix (discrete maximum
principle for source-free data).

Three entry points:

* :func:`solve_degenerate_dirichlet` -- Cauchy-Dirichlet problem
  u_t - w(x,t) Lap u = g with w = d^alpha * B vanishing on the interface;
* :func:`solve_halfspace_model` -- the same engine specialized to the
  weight x_N^alpha on a truncated half-space slab;
* :func:`harmonic_extension` -- per-time-slice Laplace solves used by the
  interface extension operator.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fd
from .errors import LinearSolveFailure, ShapeMismatch


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid over one phase (or one half-space slab).

    lam is the signed normal coordinate; the interface sits at the end
    where lam == 0 (first node on the plus side, last node on the minus
    side).  omega is the tangential coordinate: a single dummy node for
    1d segments, a periodic angle for the annulus, a Dirichlet-bounded
    coordinate for half-space slabs.
    """

    lam: np.ndarray
    omega: np.ndarray = field(default_factory=lambda: np.zeros(1))
    kind: str = "cartesian"         # "cartesian" | "annulus"
    R: float = 0.0                  # annulus base radius, r = R + lam
    omega_dirichlet: bool = False   # Dirichlet-0 rows at the omega edges

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
        if self.lam.ndim != 1 or np.any(np.diff(self.lam) <= 0):
            raise ShapeMismatch("lam must be 1d strictly increasing")
        if self.kind not in ("cartesian", "annulus"):
            raise ShapeMismatch(f"unknown grid kind {self.kind!r}")

    @property
    def n_lam(self):
        return self.lam.size

    @property
    def n_omega(self):
        return self.omega.size

    @property
    def shape(self):
        return (self.n_lam, self.n_omega)

    @property
    def size(self):
        return self.n_lam * self.n_omega

    @property
    def h_lam(self):
        return float(self.lam[1] - self.lam[0])

    @property
    def h_omega(self):
        return float(self.omega[1] - self.omega[0]) if self.n_omega > 1 else 0.0

    @property
    def periodic_omega(self):
        return self.kind == "annulus" and self.n_omega > 1

    @property
    def interface_end(self):
        """'first' or 'last': which lam end carries the interface (lam==0)."""
        if abs(self.lam[0]) < abs(self.lam[-1]):
            return "first"
        return "last"

    @property
    def interface_index(self):
        return 0 if self.interface_end == "first" else self.n_lam - 1

    @property
    def outer_index(self):
        return self.n_lam - 1 if self.interface_end == "first" else 0

    def radius(self):
        """r = R + lam per node (annulus only)."""
        return self.R + self.lam

    def interface_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[self.interface_index, :] = True
        return m

    def outer_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[self.outer_index, :] = True
        return m

    def omega_edge_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        if self.omega_dirichlet and self.n_omega > 1:
            m[:, 0] = True
            m[:, -1] = True
        return m

    def boundary_mask(self):
        return self.interface_mask() | self.outer_mask() | self.omega_edge_mask()

    def meshes(self):
        """(LAM, OMEGA) arrays of shape (n_lam, n_omega)."""
        return np.meshgrid(self.lam, self.omega, indexing="ij")


@dataclass
class GridField:
    """Space-time field on a PhaseGrid; time is the trailing axis."""

    grid: PhaseGrid
    times: np.ndarray
    values: np.ndarray  # (n_lam, n_omega, n_t)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        expect = self.grid.shape + (self.times.size,)
        if self.values.shape != expect:
            raise ShapeMismatch(
                f"field shape {self.values.shape} != grid x time {expect}")

    @property
    def n_t(self):
        return self.times.size

    def interface_normal_deriv(self, p=None):
        """d/dlam on the interface row: (n_omega, n_t).

        With p=None, one-sided second-order polynomial stencil.  With an
        exponent p in (1, 2), the singularity-tolerant fit of
        fd.fitted_interface_slope (used for degenerate front profiles).
        """
        if p is None:
            return fd.one_sided_deriv_at(
                self.values, self.grid.h_lam, axis=0,
                end=self.grid.interface_end)
        return fd.fitted_interface_slope(
            self.values, self.grid.h_lam, axis=0,
            end=self.grid.interface_end, p=p)

    def interface_trace(self):
        return self.values[self.grid.interface_index].copy()

    def to_text(self):
        g = self.grid
        lines = [
            f"kind {g.kind}",
            f"n_lam {g.n_lam}",
            f"n_omega {g.n_omega}",
            f"n_t {self.n_t}",
            f"R {g.R:.17g}",
            f"omega_dirichlet {int(g.omega_dirichlet)}",
            "lam " + " ".join(f"{v:.17g}" for v in g.lam),
            "omega " + " ".join(f"{v:.17g}" for v in g.omega),
            "times " + " ".join(f"{v:.17g}" for v in self.times),
        ]
        flat = self.values.reshape(g.size, self.n_t)
        for row in flat:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.strip().splitlines()
        head = {}
        for ln in lines[:6]:
            key, val = ln.split(None, 1)
            head[key] = val
        n_lam = int(head["n_lam"])
        n_omega = int(head["n_omega"])
        n_t = int(head["n_t"])
        lam = np.array([float(v) for v in lines[6].split()[1:]])
        omega = np.array([float(v) for v in lines[7].split()[1:]])
        times = np.array([float(v) for v in lines[8].split()[1:]])
        grid = PhaseGrid(lam=lam, omega=omega, kind=head["kind"],
                         R=float(head["R"]),
                         omega_dirichlet=bool(int(head["omega_dirichlet"])))
        vals = np.array([[float(v) for v in ln.split()] for ln in lines[9:]])
        return cls(grid=grid, times=times,
                   values=vals.reshape(n_lam, n_omega, n_t))


# ---------------------------------------------------------------------------
# sparse spatial operators
# ---------------------------------------------------------------------------

def _d2_1d(n, h):
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="lil") / h**2


def _d1_1d(n, h):
    off = np.ones(n - 1) / (2.0 * h)
    return sp.diags([-off, off], [-1, 1], format="lil")


def _d2_periodic(n, h):
    m = _d2_1d(n, h).tolil()
    m[0, -1] = 1.0 / h**2
    m[-1, 0] = 1.0 / h**2
    return m


def laplacian_matrix(grid):
    """Sparse Laplacian on the flattened (lam-major) grid.

    Cartesian: d2/dlam2 + d2/domega2.  Annulus: d2/dr2 + (1/r) d/dr
    + (1/r^2) d2/domega2 with periodic omega.
    """
    nl, no = grid.n_lam, grid.n_omega
    d2l = sp.csr_matrix(_d2_1d(nl, grid.h_lam))
    eye_o = sp.identity(no, format="csr")
    if grid.kind == "annulus":
        r = grid.radius()
        radial = d2l + sp.diags(1.0 / r) @ sp.csr_matrix(_d1_1d(nl, grid.h_lam))
        lap = sp.kron(radial, eye_o, format="csr")
        if no > 1:
            d2o = sp.csr_matrix(_d2_periodic(no, grid.h_omega))
            lap = lap + sp.kron(sp.diags(1.0 / r**2), d2o, format="csr")
        return lap
    lap = sp.kron(d2l, eye_o, format="csr")
    if no > 1:
        d2o = sp.csr_matrix(_d2_1d(no, grid.h_omega))
        lap = lap + sp.kron(sp.identity(nl, format="csr"), d2o, format="csr")
    return lap


def lam_gradient_matrix(grid):
    """Sparse centered d/dlam (one-sided second order at the lam edges)."""
    nl, no = grid.n_lam, grid.n_omega
    h = grid.h_lam
    d1 = _d1_1d(nl, h).tolil()
    d1[0, 0], d1[0, 1], d1[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    d1[-1, -1], d1[-1, -2], d1[-1, -3] = 1.5 / h, -2.0 / h, 0.5 / h
    return sp.kron(sp.csr_matrix(d1), sp.identity(no, format="csr"),
                   format="csr")


# ---------------------------------------------------------------------------
# implicit time stepping
# ---------------------------------------------------------------------------

def _dirichlet_rows(matrix, mask_flat):
    m = matrix.tolil()
    idx = np.flatnonzero(mask_flat)
    for i in idx:
        m.rows[i] = [i]
        m.data[i] = [1.0]
    return m.tocsc()


def implicit_march(grid, times, initial, operator_for_step, source,
                   dirichlet_mask, dirichlet_values, time_dependent=True):
    """March (I/dt - L_n) u^n = u^{n-1}/dt + g^n with Dirichlet rows.

    operator_for_step(n) returns the sparse spatial operator L for step n;
    with time_dependent=False the step matrix is factorized once and
    reused (re-factorized only if dt changes).  source and
    dirichlet_values are (n_lam, n_omega, n_t); the Dirichlet values are
    read on dirichlet_mask and imposed exactly.
    """
    n_t = times.size
    mask_flat = dirichlet_mask.reshape(-1)
    out = np.empty(grid.shape + (n_t,))
    u = np.array(initial, dtype=float).reshape(-1)
    out[..., 0] = u.reshape(grid.shape)
    lu = None
    last_dt = None
    for n in range(1, n_t):
        dt = times[n] - times[n - 1]
        if lu is None or time_dependent or dt != last_dt:
            op = operator_for_step(n)
            step = sp.identity(grid.size, format="csc") / dt - op
            step = _dirichlet_rows(step, mask_flat)
            try:
                lu = spla.splu(step.tocsc())
            except RuntimeError as exc:
                raise LinearSolveFailure(str(exc)) from exc
            last_dt = dt
        rhs = u / dt + source[..., n].reshape(-1)
        rhs[mask_flat] = dirichlet_values[..., n].reshape(-1)[mask_flat]
        u = lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise LinearSolveFailure(f"non-finite solution at step {n}")
        out[..., n] = u.reshape(grid.shape)
    return out


# ---------------------------------------------------------------------------
# problem descriptions and solvers
# ---------------------------------------------------------------------------

@dataclass
class DegenerateProblem:
    """Cauchy-Dirichlet data for u_t - w(x,t) Lap u = g on one phase.

    weight is the full degenerate coefficient d(x)^alpha * B(x,t); it must
    be nonnegative and vanish exactly on the interface row only (where the
    Dirichlet row replaces the PDE anyway).
    """

    grid: PhaseGrid
    times: np.ndarray
    weight: np.ndarray           # (n_lam, n_omega, n_t)
    source: np.ndarray           # g
    interface_data: np.ndarray   # f on Gamma_T: (n_omega, n_t)
    outer_data: np.ndarray       # h on the outer boundary: (n_omega, n_t)
    initial: np.ndarray | None = None   # default zeros
    zero_class: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n_t = self.times.size
        shape = self.grid.shape + (n_t,)
        self.weight = np.broadcast_to(np.asarray(self.weight, float), shape).copy()
        self.source = np.broadcast_to(np.asarray(self.source, float), shape).copy()
        bshape = (self.grid.n_omega, n_t)
        self.interface_data = np.broadcast_to(
            np.asarray(self.interface_data, float), bshape).copy()
        self.outer_data = np.broadcast_to(
            np.asarray(self.outer_data, float), bshape).copy()
        if self.initial is None:
            self.initial = np.zeros(self.grid.shape)
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.shape != self.grid.shape:
            raise ShapeMismatch("initial state does not match the grid")
        if np.any(self.weight < 0):
            raise ShapeMismatch("degenerate weight must be nonnegative")
        if self.zero_class:
            for arr in (self.source[..., 0], self.interface_data[..., 0],
                        self.outer_data[..., 0], self.initial):
                if np.any(arr != 0.0):
                    raise ShapeMismatch("zero-class data must vanish at t=0")


def _dirichlet_field(p):
    """Full-size array holding boundary data at the Dirichlet rows."""
    g = p.grid
    vals = np.zeros(g.shape + (p.times.size,))
    vals[g.interface_index, :, :] = p.interface_data
    vals[g.outer_index, :, :] = p.outer_data
    # omega edges (half-space slabs) stay at zero
    return vals


def solve_degenerate_dirichlet(p):
    """Backward-Euler solution of the degenerate Cauchy-Dirichlet problem."""
    g = p.grid
    lap = laplacian_matrix(g)
    w = p.weight
    time_dep = bool(np.ptp(w, axis=-1).max() > 0.0)

    def op(n):
        return sp.diags(w[..., n].reshape(-1)) @ lap

    vals = implicit_march(g, p.times, p.initial, op, p.source,
                          g.boundary_mask(), _dirichlet_field(p),
                          time_dependent=time_dep)
    return GridField(grid=g, times=p.times, values=vals)


def halfspace_slab(depth, half_width, n_deep, n_wide):
    """Truncated half-space grid {0 <= x_N <= depth, |x_1| <= half_width}.

    lam plays the role of x_N (interface at 0), omega the role of x_1 with
    Dirichlet-0 side walls.  Truncation depth should make the far-field
    tails of the data negligible (e.g. e^{-depth} < 1e-8).
    """
    return PhaseGrid(lam=np.linspace(0.0, depth, n_deep),
                     omega=np.linspace(-half_width, half_width, n_wide),
                     kind="cartesian", omega_dirichlet=n_wide > 1)


def solve_halfspace_model(f, g, alpha, slab, times, outer_data=None):
    """Half-space model u_t - x_N^alpha Lap u = g, u = f at x_N = 0.

    f, g must vanish at the initial time (zero-class).  The far boundary
    is Dirichlet (zero by default; pass outer_data for manufactured runs).
    """
    n_t = np.asarray(times).size
    weight = slab.lam[:, None, None] ** alpha
    if slab.interface_end != "first":
        raise ShapeMismatch("half-space slab must start at x_N = 0")
    p = DegenerateProblem(
        grid=slab, times=times, weight=weight, source=g,
        interface_data=f,
        outer_data=np.zeros((slab.n_omega, n_t)) if outer_data is None
        else outer_data,
        zero_class=outer_data is None,
    )
    return solve_degenerate_dirichlet(p)


def harmonic_extension(f, grid, times=None):
    """Slice-wise Dirichlet Laplace solve: Lap u = 0, u = f on the interface.

    f has shape (n_omega, n_t); the outer boundary (and omega edges, where
    present) are held at zero.  Satisfies the discrete maximum principle
    |u| <= max |f| per slice.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    if f.shape[0] != grid.n_omega:
        raise ShapeMismatch("interface data does not match the omega grid")
    n_t = f.shape[1]
    if times is None:
        times = np.arange(n_t, dtype=float)
    lap = laplacian_matrix(grid)
    mask = grid.boundary_mask().reshape(-1)
    mat = _dirichlet_rows(-lap.tocsc(), mask)
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    out = np.zeros(grid.shape + (n_t,))
    bvals = np.zeros(grid.shape)
    for n in range(n_t):
        bvals[:] = 0.0
        bvals[grid.interface_index, :] = f[:, n]
        rhs = np.zeros(grid.size)
        rhs[mask] = bvals.reshape(-1)[mask]
        u = lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise LinearSolveFailure(f"non-finite extension at slice {n}")
        out[..., n] = u.reshape(grid.shape)
    return GridField(grid=grid, times=np.asarray(times, float), values=out)
