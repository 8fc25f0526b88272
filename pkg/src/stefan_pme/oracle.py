"""Reference solutions and convergence tooling used to validate solvers.

Two exact constructions are provided: a one-phase traveling wave of the
degenerate diffusion law v_t = a (V form) with the latent-heat interface
condition, and a two-phase stationary equilibrium whose interface fluxes
balance so the front does not move.  Both use the shared sign convention
module, never local sign choices.
"""

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from . import convention
from .errors import DegenerateInput, DomainError, IntegrationFailure


@dataclass
class TravelingWave:
    """Profile V(xi), xi = x - c t, with V(0) = 0 and V > 0 for xi < 0.

    The first-order reduction is exact: with q = dV/dxi,
    dq/dV = -c / (a V^alpha) and q(0) = s, so
    q(V) = s - (c m / a) V^(1/m), s = -k c / a.
    The profile integrates dV/dxi = q(V) from the front backwards.
    """

    m: float
    a_plus: float
    k: float
    c: float
    slope: float
    xi: np.ndarray
    V: np.ndarray
    tol: float = 1e-10
    _spline: interpolate.CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._spline = interpolate.CubicSpline(self.xi, self.V)

    @property
    def alpha(self):
        return (self.m - 1.0) / self.m

    def q(self, V):
        """dV/dxi as a function of V (exact first integral)."""
        V = np.asarray(V, dtype=float)
        return self.slope - (self.c * self.m / self.a_plus) \
            * np.maximum(V, 0.0) ** (1.0 / self.m)

    def value(self, xi):
        """Profile at arbitrary xi <= 0 (0 for xi > 0)."""
        xi = np.asarray(xi, dtype=float)
        out = self._spline(np.clip(xi, self.xi[0], 0.0))
        return np.where(xi >= 0.0, 0.0, np.maximum(out, 0.0))

    def front_position(self, t):
        """Physical front location x = c t (front at xi = 0)."""
        return self.c * np.asarray(t, dtype=float)

    def xi_of_V(self, V):
        """Independent quadrature of dxi = dV'/q(V'), for cross-checks."""
        def integrand(u):
            return self.m * u ** (self.m - 1.0) / (
                self.slope - (self.c * self.m / self.a_plus) * u)
        val, err = integrate.quad(integrand, 0.0, V ** (1.0 / self.m),
                                  epsabs=1e-13, epsrel=1e-12, limit=200)
        if err > 1e-9:
            raise IntegrationFailure(f"quadrature error {err:g}")
        return val

    def to_csv(self):
        buf = io.StringIO()
        buf.write("xi,V\n")
        for x, v in zip(self.xi, self.V):
            buf.write(f"{x:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, m, a_plus, k, c):
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
        slope = convention.front_slope_from_speed(c, k, a_plus)
        return cls(m=m, a_plus=a_plus, k=k, c=c, slope=slope,
                   xi=rows[:, 0], V=rows[:, 1])


def _self_check(tw, Xi, dense):
    """Emit-time consistency checks of a freshly integrated profile.

    Three layers.  (1) The first-order reduction dV/dxi = q(V) is checked
    by fourth-order finite differences on a fine grid away from the
    front; near the front V'' blows up like |xi|^(1/m - 2) and raw
    differencing is meaningless there.  (2) The second-order residual
    -c V' - a V^alpha V'' with V' = q(V), V'' = q'(V) q(V) vanishes as an
    algebraic identity; asserted to rounding.  (3) The near-front region
    is covered by comparing xi against an independent quadrature of the
    first integral.
    """
    a, c, m = tw.a_plus, tw.c, tw.m
    lo = min(0.2 * Xi, 0.2)
    h = 5e-3
    xi_chk = np.arange(-Xi + 2 * h, -lo, h)
    if xi_chk.size >= 9:
        V5 = dense(np.stack([xi_chk + j * h for j in (-2, -1, 0, 1, 2)]))
        Vp_fd = (V5[0] - 8 * V5[1] + 8 * V5[3] - V5[4]) / (12.0 * h)
        res1 = Vp_fd - tw.q(V5[2])
        scale = max(1.0, abs(tw.slope))
        if np.abs(res1).max() > 1e-8 * scale:
            raise IntegrationFailure(
                f"first-order residual {np.abs(res1).max():g} exceeds 1e-8")
        # exact substitution: V' = q(V), V'' = q'(V) q(V)
        V = V5[2]
        qV = tw.q(V)
        qpV = -(c / a) * V ** (-tw.alpha)
        res2 = -c * qV - a * V ** tw.alpha * qpV * qV
        if np.abs(res2).max() > 1e-11 * max(1.0, c * abs(tw.slope)):
            raise IntegrationFailure("first-integral identity violated")
    for frac in (0.05, 0.3, 0.7, 0.95):
        Vq = frac * tw.V.max()
        if Vq <= 0.0:
            continue
        xi_quad = tw.xi_of_V(Vq)
        xi_ode = float(interpolate.CubicSpline(tw.V[::-1], tw.xi[::-1])(Vq))
        if abs(xi_quad - xi_ode) > 1e-8 * max(1.0, Xi):
            raise IntegrationFailure(
                f"first-integral mismatch {abs(xi_quad - xi_ode):g}")


def traveling_wave_profile(m, a_plus, k, c, Xi, n, slope=None):
    """One-phase traveling wave on xi in [-Xi, 0], sampled at n nodes.

    The front slope follows from the latent-heat condition through the
    shared convention helper; passing `slope` overrides it (used for the
    zero-speed ramp limit).  Raises IntegrationFailure if the emitted
    profile fails its residual or first-integral checks.
    """
    if m <= 1.0:
        raise DomainError("need m > 1")
    if c < 0.0:
        raise DomainError("need c >= 0")
    if slope is None:
        slope = convention.front_slope_from_speed(c, k, a_plus)
    if slope >= 0.0:
        raise DomainError("front slope must be negative (occupied side)")
    xi_nodes = np.linspace(-Xi, 0.0, n)

    def rhs(xi, y):
        return [slope - (c * m / a_plus) * max(y[0], 0.0) ** (1.0 / m)]

    sol = integrate.solve_ivp(rhs, (0.0, -Xi), [0.0], method="DOP853",
                              rtol=1e-12, atol=1e-16, dense_output=True)
    if not sol.success:
        raise IntegrationFailure(sol.message)

    def dense(x):
        return sol.sol(np.asarray(x).ravel())[0].reshape(np.shape(x))

    V = dense(xi_nodes)
    tw = TravelingWave(m=m, a_plus=a_plus, k=k, c=c, slope=slope,
                       xi=xi_nodes, V=np.maximum(V, 0.0))
    xi_fine = np.linspace(-Xi, 0.0, max(4001, 4 * n))
    tw._spline = interpolate.CubicSpline(xi_fine,
                                         np.maximum(dense(xi_fine), 0.0))
    if not np.all(np.diff(tw.V) < 0.0):
        raise IntegrationFailure("profile is not strictly monotone")
    if c > 0.0:
        _self_check(tw, Xi, dense)
    return tw


@dataclass
class Equilibrium:
    """Stationary two-phase state: harmonic profiles with balanced flux.

    Segment: v = b lam on each side.  Annulus: v = A log(r / R).  The
    minus-side coefficient is scaled so the interface flux jump is zero,
    hence the front velocity from the convention helper vanishes.
    """

    geom: object
    a_plus: float
    a_minus: float
    coef_plus: float
    coef_minus: float

    def v_side(self, lam, side):
        lam = np.asarray(lam, dtype=float)
        coef = self.coef_plus if side == "+" else self.coef_minus
        if self.geom.kind == "segment1d":
            return coef * lam
        return coef * np.log((self.geom.R + lam) / self.geom.R)

    def v(self, lam):
        """Combined profile, valid across the interface."""
        lam = np.asarray(lam, dtype=float)
        return np.where(lam >= 0.0, self.v_side(lam, "+"),
                        self.v_side(lam, "-"))

    def interface_flux(self, side):
        coef = self.coef_plus if side == "+" else self.coef_minus
        a = self.a_plus if side == "+" else self.a_minus
        if self.geom.kind == "segment1d":
            return a * coef
        return a * coef / self.geom.R

    @property
    def flux_residual(self):
        return self.interface_flux("+") - self.interface_flux("-")

    def discrete_flux_residual(self, n_lam=128):
        """Flux jump from one-sided differences of the sampled profiles.

        Fourth-order one-sided stencils keep the residual of the smooth
        log-radial profiles below 1e-6 on grids of about 128 nodes.
        """
        lamp = np.linspace(0.0, self.geom.side_length("+"), n_lam)
        lamm = np.linspace(-self.geom.side_length("-"), 0.0, n_lam)
        hp = lamp[1] - lamp[0]
        hm = lamm[1] - lamm[0]
        vp = self.v_side(lamp, "+")
        vm = self.v_side(lamm, "-")
        dvp = (-25.0 * vp[0] + 48.0 * vp[1] - 36.0 * vp[2]
               + 16.0 * vp[3] - 3.0 * vp[4]) / (12.0 * hp)
        dvm = (25.0 * vm[-1] - 48.0 * vm[-2] + 36.0 * vm[-3]
               - 16.0 * vm[-4] + 3.0 * vm[-5]) / (12.0 * hm)
        return self.a_plus * dvp - self.a_minus * dvm


def stationary_equilibrium(geom, a_plus, a_minus, outer_plus):
    """Equilibrium fixed by the positive outer boundary value.

    The plus profile interpolates 0 on the interface and outer_plus on
    the outer boundary; the minus profile is the matching harmonic field
    whose flux balances the jump condition exactly (so the induced front
    velocity is zero by construction).
    """
    if outer_plus <= 0.0:
        raise DomainError("outer boundary value on the plus side must be > 0")
    if geom.kind == "segment1d":
        coef_plus = outer_plus / geom.L_plus
    else:
        coef_plus = outer_plus / np.log(geom.R_plus / geom.R)
    coef_minus = a_plus * coef_plus / a_minus
    eq = Equilibrium(geom=geom, a_plus=a_plus, a_minus=a_minus,
                     coef_plus=coef_plus, coef_minus=coef_minus)
    assert abs(eq.flux_residual) < 1e-12 * max(1.0, abs(coef_plus))
    return eq


@dataclass(frozen=True)
class OrderFit:
    order: float
    pairwise: tuple


def convergence_order(runs):
    """Observed order from (h, error) pairs with h roughly halving.

    Least-squares slope of log error against log h, plus the pairwise
    orders; raises DegenerateInput when the errors do not decrease with
    h, which makes the fitted order meaningless.
    """
    runs = sorted(runs)
    if len(runs) < 3:
        raise DomainError("need at least 3 runs")
    h = np.array([r[0] for r in runs], dtype=float)
    e = np.array([r[1] for r in runs], dtype=float)
    if np.any(e <= 0.0):
        raise DegenerateInput("errors must be positive")
    if np.any(np.diff(e) <= 0.0):
        raise DegenerateInput("errors must decrease as h decreases")
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    pairwise = tuple(
        float(np.log(e[i + 1] / e[i]) / np.log(h[i + 1] / h[i]))
        for i in range(len(runs) - 1))
    return OrderFit(order=float(slope), pairwise=pairwise)
