"""Discrete estimators for weighted parabolic Hölder seminorms.

Functions live on a tensor grid over a half-space slab: one tangential
axis x', a normal axis x_N >= 0 and time.  The degenerate-distance
seminorm H_s uses the quasi-metric

    s(x, xbar) = |x - xbar| / (x_N^{a/2} + xbar_N^{a/2} + |x' - xbar'|^{a/2})

and the weighted seminorm H_alpha combines a plain beta-Hölder constant
with a term weighted by max(x_N, xbar_N)^{gamma a / 2}.  All estimators
scan pairs of same-time spatial points: every pair on grids up to 33
nodes per axis, axis-aligned lines plus a seeded random sample beyond
that.  They are sup-type, hence monotone in the pair set.
"""

from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np

from . import fd
from .errors import DegenerateInput, DomainError, ShapeMismatch

ALL_PAIRS_LIMIT = 33     # per-axis node count up to which every pair is used
RANDOM_PAIRS = 100_000   # extra seeded pairs on larger grids
PAIR_SEED = 20260823
_CHUNK = 200_000


@dataclass
class SampledFunction:
    """f(x', x_N, t) on a tensor grid, values shaped (n_xp, n_xN, n_t)."""

    values: np.ndarray
    x_prime: np.ndarray
    x_N: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.x_prime = np.asarray(self.x_prime, dtype=float)
        self.x_N = np.asarray(self.x_N, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        want = (self.x_prime.size, self.x_N.size, self.times.size)
        if self.values.shape != want:
            raise ShapeMismatch(
                f"values shape {self.values.shape} != {want}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("values must be finite")
        if np.any(self.x_N < 0.0):
            raise DomainError("normal coordinates must be nonnegative")
        for c in (self.x_prime, self.x_N, self.times):
            if c.size > 1 and np.any(np.diff(c) <= 0.0):
                raise DomainError("grid axes must be strictly increasing")

    def flat_space(self):
        """Values reshaped to (n_points, n_t), points in C order."""
        return self.values.reshape(-1, self.times.size)


def s_distance(x, xbar, alpha):
    """Degenerate quasi-distance; the last coordinate is the normal one."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    if x[-1] < 0.0 or xbar[-1] < 0.0:
        raise DomainError("normal coordinate must be nonnegative")
    diff = x - xbar
    euclid = float(np.linalg.norm(diff))
    if euclid == 0.0:
        return 0.0
    tang = float(np.linalg.norm(diff[:-1]))
    denom = x[-1] ** (alpha / 2.0) + xbar[-1] ** (alpha / 2.0) \
        + tang ** (alpha / 2.0)
    return euclid / denom


@lru_cache(maxsize=16)
def _pair_data(xp_key, xN_key, alpha):
    """Pair sample for a spatial grid: indices, distances, s, weights.

    Cached per (grid, alpha) so a whole corpus of functions on the same
    grid reuses one geometric precomputation.
    """
    xp = np.array(xp_key)
    xN = np.array(xN_key)
    n_xp, n_xN = xp.size, xN.size
    pts_p, pts_N = np.meshgrid(xp, xN, indexing="ij")
    pts_p = pts_p.ravel()
    pts_N = pts_N.ravel()
    P = pts_p.size
    if max(n_xp, n_xN) <= ALL_PAIRS_LIMIT:
        I, J = np.triu_indices(P, k=1)
    else:
        idx = np.arange(P).reshape(n_xp, n_xN)
        pairs = []
        for row in idx:                       # lines of constant x'
            a, b = np.triu_indices(row.size, k=1)
            pairs.append((row[a], row[b]))
        for col in idx.T:                     # lines of constant x_N
            a, b = np.triu_indices(col.size, k=1)
            pairs.append((col[a], col[b]))
        rng = np.random.default_rng(PAIR_SEED)
        ri = rng.integers(0, P, size=RANDOM_PAIRS)
        rj = rng.integers(0, P, size=RANDOM_PAIRS)
        keep = ri != rj
        pairs.append((ri[keep], rj[keep]))
        I = np.concatenate([p[0] for p in pairs])
        J = np.concatenate([p[1] for p in pairs])
    dp = pts_p[I] - pts_p[J]
    dN = pts_N[I] - pts_N[J]
    dist = np.hypot(dp, dN)
    denom = pts_N[I] ** (alpha / 2.0) + pts_N[J] ** (alpha / 2.0) \
        + np.abs(dp) ** (alpha / 2.0)
    s = dist / denom
    xN_max = np.maximum(pts_N[I], pts_N[J])
    return I, J, dist, s, xN_max


def _pairs_for(f, alpha):
    return _pair_data(tuple(f.x_prime), tuple(f.x_N), float(alpha))


def _max_time_diff(flat, I, J):
    """max over t of |f(x_I, t) - f(x_J, t)| per pair, chunked."""
    out = np.empty(I.size)
    for start in range(0, I.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = np.abs(flat[I[sl]] - flat[J[sl]]).max(axis=1)
    return out


def _hs_of_values(values, f, gamma, alpha):
    I, J, _, s, _ = _pairs_for(f, alpha)
    if I.size == 0:
        return 0.0
    D = _max_time_diff(values.reshape(-1, f.times.size), I, J)
    return float((D / s**gamma).max())


def _halpha_of_values(values, f, gamma, alpha):
    beta = gamma * (1.0 - alpha / 2.0)
    I, J, dist, _, xN_max = _pairs_for(f, alpha)
    if I.size == 0:
        return 0.0
    D = _max_time_diff(values.reshape(-1, f.times.size), I, J)
    unweighted = (D / dist**beta).max()
    weighted = (xN_max ** (gamma * alpha / 2.0) * D / dist**gamma).max()
    return float(unweighted + weighted)


def _time_holder_of_values(values, times, exponent):
    """Same-point, different-time Hölder constant, max over space."""
    n_t = times.size
    if n_t < 2:
        return 0.0
    flat = values.reshape(-1, n_t)
    best = 0.0
    for n in range(n_t):
        for p in range(n + 1, n_t):
            dt = times[p] - times[n]
            d = np.abs(flat[:, p] - flat[:, n]).max()
            best = max(best, d / dt**exponent)
    return float(best)


def seminorm_Hs(f, gamma, alpha):
    """Hölder constant in the degenerate distance s, exponent gamma."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    return _hs_of_values(f.values, f, gamma, alpha)


def seminorm_Halpha(f, gamma, alpha):
    """Weighted seminorm: beta-Hölder constant plus the weighted block."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    return _halpha_of_values(f.values, f, gamma, alpha)


def time_holder(f, exponent):
    """<f>_t: sup over space of the time Hölder constant."""
    return _time_holder_of_values(f.values, f.times, exponent)


def pair_count(f, alpha):
    return int(_pairs_for(f, alpha)[0].size)


@dataclass
class NormReport:
    """Components of the weighted second-order parabolic norm.

    d1_seminorms holds the C_s^{gamma, gamma/2} seminorm blocks of the
    two first derivatives (tangential, normal); d2_weighted_seminorms
    those of x_N^alpha times the three second derivatives (pp, pN, NN).
    """

    sup_norm: float = 0.0
    H_s_gamma: float = 0.0
    H_alpha_gamma: float = 0.0
    time_holder: float = 0.0
    d1_seminorms: tuple = ()
    dt_seminorm: float = 0.0
    d2_weighted_seminorms: tuple = ()
    interface_norm: float = 0.0
    pairs_used: int = 0

    def cs2gamma_total(self):
        return (self.sup_norm + self.H_s_gamma + self.time_holder
                + self.dt_seminorm + sum(self.d1_seminorms)
                + sum(self.d2_weighted_seminorms))

    def to_text(self):
        """Flat key = value block, one entry per line."""
        lines = []
        for fld in fields(self):
            val = getattr(self, fld.name)
            if isinstance(val, tuple):
                for i, v in enumerate(val):
                    lines.append(f"{fld.name}_{i} = {v:.17g}")
                lines.append(f"n_{fld.name} = {len(val)}")
            elif isinstance(val, int):
                lines.append(f"{fld.name} = {val}")
            else:
                lines.append(f"{fld.name} = {val:.17g}")
        lines.append(f"cs2gamma_total = {self.cs2gamma_total():.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        entries = {}
        for line in text.strip().splitlines():
            key, _, val = line.partition("=")
            entries[key.strip()] = val.strip()
        kwargs = {}
        for fld in fields(cls):
            if fld.name in entries:
                cast = int if fld.name == "pairs_used" else float
                kwargs[fld.name] = cast(entries[fld.name])
            elif f"n_{fld.name}" in entries:
                n = int(entries[f"n_{fld.name}"])
                kwargs[fld.name] = tuple(
                    float(entries[f"{fld.name}_{i}"]) for i in range(n))
        return cls(**kwargs)


def _component(values, f, gamma, alpha):
    """C_s^{gamma, gamma/2} seminorm block: H_s plus the time block."""
    return (_hs_of_values(values, f, gamma, alpha)
            + _time_holder_of_values(values, f.times, gamma / 2.0))


def norm_Cs2gamma(f, gamma, alpha):
    """Weighted second-order norm with per-component breakdown."""
    fp = fd.deriv(f.values, f.x_prime, axis=0) if f.x_prime.size > 2 \
        else np.zeros_like(f.values)
    fN = fd.deriv(f.values, f.x_N, axis=1)
    ft = fd.deriv(f.values, f.times, axis=2) if f.times.size > 2 \
        else np.zeros_like(f.values)
    fpp = fd.deriv(fp, f.x_prime, axis=0) if f.x_prime.size > 2 \
        else np.zeros_like(f.values)
    fpN = fd.deriv(fp, f.x_N, axis=1)
    fNN = fd.deriv(fN, f.x_N, axis=1)
    w = f.x_N[None, :, None] ** alpha
    return NormReport(
        sup_norm=float(np.abs(f.values).max()),
        H_s_gamma=_hs_of_values(f.values, f, gamma, alpha),
        H_alpha_gamma=_halpha_of_values(f.values, f, gamma, alpha),
        time_holder=_time_holder_of_values(f.values, f.times, gamma / 2.0),
        d1_seminorms=(_component(fp, f, gamma, alpha),
                      _component(fN, f, gamma, alpha)),
        dt_seminorm=_component(ft, f, gamma, alpha),
        d2_weighted_seminorms=(_component(w * fpp, f, gamma, alpha),
                               _component(w * fpN, f, gamma, alpha),
                               _component(w * fNN, f, gamma, alpha)),
        pairs_used=pair_count(f, alpha),
    )


def _holder_in_omega(values, omega, exponent, periodic):
    """sup over t of the omega-Hölder constant of a (n_omega, n_t) field."""
    n = omega.size
    if n < 3:
        return 0.0
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(omega[i] - omega[j])
            if periodic:
                d = min(d, 2.0 * np.pi - d)
            if d == 0.0:
                continue
            diff = np.abs(values[i] - values[j]).max()
            best = max(best, diff / d**exponent)
    return float(best)


def interface_parabolic_norm(rho, beta, alpha, periodic=True):
    """Norm of a front field: derivative sups plus four Hölder blocks.

    Blocks: the (1 + beta - alpha) omega-Hölder constants of rho_omega
    and rho_t, the gamma/2 time block of rho_t, and the time block of
    rho_t at the matching reduced exponent (1+beta-alpha)/(2-alpha).
    """
    gamma = beta / (1.0 - alpha / 2.0)
    ex_sp = 1.0 + beta - alpha
    if not 0.0 < ex_sp < 1.0:
        raise DomainError("need beta < alpha so 1+beta-alpha is in (0,1)")
    omega = rho.omega
    if omega.size >= 3:
        if periodic:
            rho_om = fd.periodic_deriv(rho.rho, omega[1] - omega[0], axis=0)
        else:
            rho_om = fd.deriv(rho.rho, omega, axis=0)
    else:
        rho_om = np.zeros_like(rho.rho)
    rho_t = rho.rho_t
    total = float(np.abs(rho_om).max() + np.abs(rho_t).max())
    total += _holder_in_omega(rho_om, omega, ex_sp, periodic)
    total += _holder_in_omega(rho_t, omega, ex_sp, periodic)
    total += _time_holder_of_values(rho.rho[:, None, :], rho.times,
                                    gamma / 2.0)
    total += _time_holder_of_values(rho_t[:, None, :], rho.times,
                                    ex_sp / (2.0 - alpha))
    return total


@dataclass(frozen=True)
class EquivalenceReport:
    ratio: float
    H_alpha: float
    H_s: float
    within_interval: bool
    c_star: float


def equivalence_report(f, gamma, alpha, c_star=100.0):
    """Ratio of the two seminorms and a two-sided interval check."""
    hs = seminorm_Hs(f, gamma, alpha)
    if hs == 0.0:
        raise DegenerateInput("H_s vanishes, ratio undefined")
    ha = seminorm_Halpha(f, gamma, alpha)
    r = ha / hs
    return EquivalenceReport(ratio=r, H_alpha=ha, H_s=hs,
                             within_interval=1.0 / c_star <= r <= c_star,
                             c_star=c_star)
