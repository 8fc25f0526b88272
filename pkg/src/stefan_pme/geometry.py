"""Reference domain, tubular coordinates and the front parameterization.

Two geometries are supported: a 1d segment with the interface at lam = 0
and a 2d annulus with the interface circle at radius R.  Both keep the
tubular chart global: omega is a dummy point on the segment and the polar
angle on the annulus, lam the signed normal distance (positive on the
plus side).

The extension operator E takes interface samples rho(omega, t) to a field
on the fixed grid: the samples carried constant along normals, multiplied
by a smooth cutoff supported in the tube.  The front map e_rho displaces
points along the normal by the extended rho and is the identity outside
the tube.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fd, linear_pde
from .errors import DomainError, NotDiffeomorphism, OutOfTube, ShapeMismatch


@dataclass(frozen=True)
class Params:
    """Physical and analytic constants.

    alpha = (m-1)/m and beta = gamma * (1 - alpha/2) are derived exactly;
    gamma must satisfy 0 < gamma < min(alpha, 1 - alpha).
    """

    m: float
    gamma: float
    a_plus: float = 1.0
    a_minus: float = 1.0
    k: float = 1.0
    eps: float = 0.0
    nu: float = 0.1

    def __post_init__(self):
        if self.m <= 1.0:
            raise DomainError("exponent m must exceed 1")
        if not 0.0 < self.gamma < min(self.alpha, 1.0 - self.alpha):
            raise DomainError(
                "gamma must lie in (0, min(alpha, 1-alpha)) "
                f"= (0, {min(self.alpha, 1 - self.alpha):g})")
        if min(self.a_plus, self.a_minus, self.k, self.nu) <= 0.0:
            raise DomainError("a+, a-, k, nu must be positive")
        if not 0.0 <= self.eps < 1.0:
            raise DomainError("eps must lie in [0, 1)")

    @property
    def alpha(self):
        return (self.m - 1.0) / self.m

    @property
    def beta(self):
        return self.gamma * (1.0 - self.alpha / 2.0)

    @property
    def front_exponent(self):
        """Leading correction exponent 1 + 1/m of the front profile.

        Near the interface a degenerate front behaves like
        s d + C d**(1 + 1/m) in the distance d; interface flux stencils
        use this exponent to stay first-order accurate.
        """
        return 1.0 + 1.0 / self.m

    def a(self, side):
        return self.a_plus if side == "+" else self.a_minus


@dataclass(frozen=True)
class ReferenceGeometry:
    """Fixed domain with interface Gamma and tubular half-width gamma0.

    segment1d: lam in [-L_minus, L_plus], Gamma = {0}.
    annulus2d: radii R_minus < R < R_plus, Gamma the circle r = R.
    """

    kind: str
    gamma0: float
    L_minus: float = 1.0
    L_plus: float = 1.0
    R_minus: float = 0.5
    R: float = 1.0
    R_plus: float = 2.0

    def __post_init__(self):
        if self.kind not in ("segment1d", "annulus2d"):
            raise DomainError(f"unknown geometry kind {self.kind!r}")
        if self.kind == "segment1d":
            if self.L_minus <= 0 or self.L_plus <= 0:
                raise DomainError("segment must have Gamma strictly inside")
        else:
            if not 0 < self.R_minus < self.R < self.R_plus:
                raise DomainError("annulus needs R- < R < R+ (positive)")
        if not 0.0 < self.gamma0 < self.tube_limit:
            raise DomainError(
                f"gamma0 must lie in (0, {self.tube_limit:g}) so the tube "
                "stays inside the domain")

    @property
    def tube_limit(self):
        """Distance from Gamma to the nearest outer boundary."""
        if self.kind == "segment1d":
            return min(self.L_minus, self.L_plus)
        return min(self.R - self.R_minus, self.R_plus - self.R)

    def side_length(self, side):
        if self.kind == "segment1d":
            return self.L_plus if side == "+" else self.L_minus
        return self.R_plus - self.R if side == "+" else self.R - self.R_minus

    def phase_grid(self, side, n_lam, n_omega=None):
        """PhaseGrid for one phase; interface row at lam = 0."""
        L = self.side_length(side)
        lam = np.linspace(0.0, L, n_lam) if side == "+" \
            else np.linspace(-L, 0.0, n_lam)
        if self.kind == "segment1d":
            return linear_pde.PhaseGrid(lam=lam)
        if n_omega is None:
            raise ShapeMismatch("annulus grid needs n_omega")
        omega = np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False)
        return linear_pde.PhaseGrid(lam=lam, omega=omega, kind="annulus",
                                    R=self.R)

    def omega_nodes(self, n_omega):
        if self.kind == "segment1d":
            return np.zeros(1)
        return np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False)

    def distance_to_interface(self, lam):
        """d+/- surrogate: exact distance to Gamma in these geometries."""
        return np.abs(lam)


def chart_coords(x, geom):
    """Tubular coordinates (omega, lam) of a point inside the tube N.

    segment1d: x is a float, omega is the dummy 0.  annulus2d: x is a
    Cartesian pair, omega the polar angle in [0, 2 pi).
    """
    if geom.kind == "segment1d":
        lam = float(x)
        omega = 0.0
    else:
        x = np.asarray(x, dtype=float)
        r = float(np.hypot(x[0], x[1]))
        omega = float(np.mod(np.arctan2(x[1], x[0]), 2.0 * np.pi))
        lam = r - geom.R
    if abs(lam) >= geom.gamma0:
        raise OutOfTube(f"|lam| = {abs(lam):g} >= gamma0 = {geom.gamma0:g}")
    return omega, lam


def chart_point(omega, lam, geom):
    """Inverse chart: Cartesian point for (omega, lam)."""
    if geom.kind == "segment1d":
        return lam
    r = geom.R + lam
    return np.array([r * np.cos(omega), r * np.sin(omega)])


@dataclass
class InterfaceField:
    """Front deviation samples rho(omega_i, t_n) with time derivative."""

    rho: np.ndarray          # (n_omega, n_t)
    omega: np.ndarray        # (n_omega,)
    times: np.ndarray        # (n_t,)
    rho_t: np.ndarray | None = None

    def __post_init__(self):
        self.rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        self.omega = np.asarray(self.omega, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.rho.shape != (self.omega.size, self.times.size):
            raise ShapeMismatch(
                f"rho shape {self.rho.shape} != (n_omega, n_t) "
                f"({self.omega.size}, {self.times.size})")
        if self.rho_t is None:
            if self.times.size >= 3:
                self.rho_t = fd.deriv(self.rho, self.times, axis=1)
            else:
                self.rho_t = np.zeros_like(self.rho)
        else:
            self.rho_t = np.asarray(self.rho_t, dtype=float)

    @property
    def n_omega(self):
        return self.omega.size

    @property
    def n_t(self):
        return self.times.size

    def sup(self):
        return float(np.abs(self.rho).max())

    def check_invariants(self, geom):
        if self.sup() > 2.0 * geom.gamma0:
            raise NotDiffeomorphism(
                f"sup|rho| = {self.sup():g} > 2*gamma0 = {2 * geom.gamma0:g}")
        if np.any(self.rho[:, 0] != 0.0):
            raise ShapeMismatch("rho must vanish at t = 0")


def zero_interface_field(geom, n_omega, times):
    om = geom.omega_nodes(n_omega)
    return InterfaceField(rho=np.zeros((om.size, np.asarray(times).size)),
                          omega=om, times=times)


def tube_cutoff(lam, gamma0):
    """C^2 cutoff chi(lam): 1 for |lam| <= gamma0/2, 0 for |lam| >= gamma0."""
    s = (np.abs(lam) - gamma0 / 2.0) / (gamma0 / 2.0)
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass
class ExtendedField:
    """E rho on one phase grid: cutoff times the normal-constant extension.

    Carries the grid, the values (n_lam, n_omega, n_t), the in-tube
    support flags and the geometry needed for diffeomorphism checks.
    """

    grid: linear_pde.PhaseGrid
    geom: ReferenceGeometry
    times: np.ndarray
    values: np.ndarray
    in_tube: np.ndarray = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        lam = self.grid.lam
        self.in_tube = np.repeat((np.abs(lam) < self.geom.gamma0)[:, None],
                                 self.grid.n_omega, axis=1)

    def d_lam(self):
        return fd.deriv(self.values, self.grid.lam, axis=0)

    def d_omega(self):
        if self.grid.n_omega == 1:
            return np.zeros_like(self.values)
        if self.grid.periodic_omega:
            return fd.periodic_deriv(self.values, self.grid.h_omega, axis=1)
        return fd.deriv(self.values, self.grid.omega, axis=1)

    def d_t(self):
        if self.times.size < 3:
            return np.zeros_like(self.values)
        return fd.deriv(self.values, self.times, axis=2)

    def at(self, lam, omega_index, t_index):
        """Linear interpolation in lam at fixed omega and time indices."""
        return float(np.interp(lam, self.grid.lam,
                               self.values[:, omega_index, t_index]))


def extend_interface_field(rho, geom, side, grid=None, n_lam=65):
    """E rho on the given side: constant along normals times the tube cutoff.

    The trace at lam = 0 equals rho exactly at the nodes (cutoff = 1 near
    the interface) and the support lies inside the tube.  Because the
    cutoff is flat at lam = 0, the normal derivative of the extension
    vanishes on the interface from both sides, so the two one-sided
    extensions agree to first order there.  That single-valued interface
    slope is what makes the transformed flux balance consistent between
    the two phases.
    """
    if grid is None:
        grid = geom.phase_grid(side, n_lam,
                               None if geom.kind == "segment1d"
                               else rho.n_omega)
    chi = tube_cutoff(grid.lam, geom.gamma0)
    values = chi[:, None, None] * rho.rho[None, :, :]
    return ExtendedField(grid=grid, geom=geom, times=rho.times, values=values)


@dataclass(frozen=True)
class DiffeoReport:
    passed: bool
    reason: str
    sup_rho: float
    min_one_plus_rho_lam: float


THETA_MIN = 0.1  # Jacobian floor for the fold check


def check_diffeomorphism(rho_ext, theta_min=THETA_MIN):
    """Amplitude and fold check for e_rho built from the extension."""
    sup_rho = float(np.abs(rho_ext.values).max())
    jac = 1.0 + rho_ext.d_lam()
    min_jac = float(jac.min())
    if sup_rho > 2.0 * rho_ext.geom.gamma0:
        return DiffeoReport(False, "amplitude", sup_rho, min_jac)
    if min_jac < theta_min:
        return DiffeoReport(False, "fold", sup_rho, min_jac)
    return DiffeoReport(True, "", sup_rho, min_jac)


def map_e_rho(x, t_index, rho_ext):
    """Front map e_rho at a point (identity outside the tube)."""
    geom = rho_ext.geom
    if geom.kind == "segment1d":
        lam = float(x)
        if abs(lam) >= geom.gamma0:
            return lam
        i = int(np.argmin(np.abs(rho_ext.grid.omega)))
        return lam + rho_ext.at(lam, i, t_index)
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    lam = r - geom.R
    if abs(lam) >= geom.gamma0:
        return x
    omega = float(np.mod(np.arctan2(x[1], x[0]), 2.0 * np.pi))
    i = int(np.argmin(np.abs(
        np.mod(rho_ext.grid.omega - omega + np.pi, 2.0 * np.pi) - np.pi)))
    rho_val = rho_ext.at(lam, i, t_index)
    return chart_point(omega, lam + rho_val, geom)


def _rotation(omega):
    c, s = np.cos(omega), np.sin(omega)
    return np.array([[c, -s], [s, c]])


def pullback_matrix(rho_lam, rho_omega, lam, omega, rho_val, geom):
    """Coefficient matrix E of the pulled-back gradient at one point.

    E = (J_x e_rho)^{-T}; gradients transform as grad_rho f = E grad_x f.
    For the segment this is the scalar 1/(1 + rho_lam); for the annulus
    the Jacobian is expressed in the orthonormal polar frame and rotated
    back to Cartesian axes.
    """
    jac_l = 1.0 + rho_lam
    if jac_l <= 0.0:
        raise NotDiffeomorphism("1 + rho_lam must be positive")
    if geom.kind == "segment1d":
        return np.array([[1.0 / jac_l]])
    r = geom.R + lam
    J = np.array([[jac_l, rho_omega / r],
                  [0.0, (r + rho_val) / r]])
    E_frame = np.linalg.inv(J).T
    Q = _rotation(omega)
    return Q @ E_frame @ Q.T


def pullback_gradient(x, t_index, rho_ext, theta_min=THETA_MIN):
    """E at a grid-free point of the tube, from the discrete extension."""
    geom = rho_ext.geom
    report = check_diffeomorphism(rho_ext, theta_min)
    if not report.passed:
        raise NotDiffeomorphism(report.reason)
    if geom.kind == "segment1d":
        lam, omega, i = float(x), 0.0, 0
    else:
        omega, lam = chart_coords(x, geom)
        i = int(np.argmin(np.abs(
            np.mod(rho_ext.grid.omega - omega + np.pi, 2.0 * np.pi) - np.pi)))
    d_lam = rho_ext.d_lam()
    d_om = rho_ext.d_omega()
    rho_lam = float(np.interp(lam, rho_ext.grid.lam, d_lam[:, i, t_index]))
    rho_om = float(np.interp(lam, rho_ext.grid.lam, d_om[:, i, t_index]))
    rho_val = float(np.interp(lam, rho_ext.grid.lam,
                              rho_ext.values[:, i, t_index]))
    return pullback_matrix(rho_lam, rho_om, lam, omega, rho_val, geom)


def stefan_geometric_factor(rho_lam, rho_omega, omega, lam, geom, rho=0.0):
    """Tangential factor S = 1 + sum m_ij rho_wi rho_wj of the flux law.

    m_11 = 1/r^2 on the annulus (metric of the angular coordinate),
    evaluated at the displaced radius r = R + lam + rho; no tangential
    directions exist on the segment, so S = 1 there.
    """
    if np.any(1.0 + np.asarray(rho_lam) <= 0.0):
        raise NotDiffeomorphism("1 + rho_lam must be positive")
    if geom.kind == "segment1d":
        return np.ones(np.shape(rho_omega)) if np.ndim(rho_omega) else 1.0
    r = geom.R + np.asarray(lam, dtype=float) + np.asarray(rho, dtype=float)
    return 1.0 + np.asarray(rho_omega, dtype=float) ** 2 / r**2
