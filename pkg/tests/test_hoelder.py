"""Weighted parabolic Hölder seminorm estimators against brute-force oracles."""

import numpy as np
import pytest

from stefan_pme import geometry, hoelder
from stefan_pme.errors import DegenerateInput, DomainError

ALPHA = 0.5
GAMMA = 0.5


def unit_slab(n=9, values_fn=None):
    xp = np.linspace(0.0, 1.0, n)
    xN = np.linspace(0.0, 1.0, n)
    t = np.linspace(0.0, 1.0, n)
    XP, XN, T = np.meshgrid(xp, xN, t, indexing="ij")
    vals = values_fn(XP, XN, T) if values_fn else np.zeros((n, n, n))
    return hoelder.SampledFunction(values=vals, x_prime=xp, x_N=xN, times=t)


def brute_hs(f, gamma, alpha):
    """Independent all-pairs scan via dense P x P matrices."""
    pts_p, pts_N = np.meshgrid(f.x_prime, f.x_N, indexing="ij")
    pts_p, pts_N = pts_p.ravel(), pts_N.ravel()
    flat = f.values.reshape(-1, f.times.size)
    dp = pts_p[:, None] - pts_p[None, :]
    dN = pts_N[:, None] - pts_N[None, :]
    dist = np.hypot(dp, dN)
    denom = pts_N[:, None] ** (alpha / 2.0) + pts_N[None, :] ** (alpha / 2.0) \
        + np.abs(dp) ** (alpha / 2.0)
    np.fill_diagonal(dist, 0.0)
    best = 0.0
    for n in range(f.times.size):
        col = flat[:, n]
        D = np.abs(col[:, None] - col[None, :])
        mask = dist > 0.0
        best = max(best, float((D[mask] / (dist[mask] / denom[mask])
                                ** gamma).max()))
    return best


def brute_halpha(f, gamma, alpha):
    beta = gamma * (1.0 - alpha / 2.0)
    pts_p, pts_N = np.meshgrid(f.x_prime, f.x_N, indexing="ij")
    pts_p, pts_N = pts_p.ravel(), pts_N.ravel()
    flat = f.values.reshape(-1, f.times.size)
    dp = pts_p[:, None] - pts_p[None, :]
    dN = pts_N[:, None] - pts_N[None, :]
    dist = np.hypot(dp, dN)
    wmax = np.maximum(pts_N[:, None], pts_N[None, :]) ** (gamma * alpha / 2.0)
    mask = dist > 0.0
    unw = 0.0
    wei = 0.0
    for n in range(f.times.size):
        col = flat[:, n]
        D = np.abs(col[:, None] - col[None, :])
        unw = max(unw, float((D[mask] / dist[mask] ** beta).max()))
        wei = max(wei, float((wmax[mask] * D[mask]
                              / dist[mask] ** gamma).max()))
    return unw + wei


# ---------------------------------------------------------------------------
# quasi-distance
# ---------------------------------------------------------------------------

def test_s_distance_examples():
    assert hoelder.s_distance((0.3, 0.4), (0.3, 0.4), ALPHA) == 0.0
    assert hoelder.s_distance((0.0, 1.0), (0.0, 0.0), ALPHA) \
        == pytest.approx(1.0, rel=1e-15)
    assert hoelder.s_distance((4.0, 0.0), (0.0, 0.0), ALPHA) \
        == pytest.approx(4.0 ** 0.75, rel=1e-14)


def test_s_distance_symmetric_and_domain_checked():
    a, b = (0.2, 0.7), (0.9, 0.1)
    assert hoelder.s_distance(a, b, ALPHA) == hoelder.s_distance(b, a, ALPHA)
    with pytest.raises(DomainError):
        hoelder.s_distance((0.0, -0.1), (0.0, 0.0), ALPHA)


# ---------------------------------------------------------------------------
# seminorms vs brute force
# ---------------------------------------------------------------------------

def test_hs_constant_is_zero():
    f = unit_slab(7, lambda XP, XN, T: np.full_like(XP, 3.7))
    assert hoelder.seminorm_Hs(f, GAMMA, ALPHA) == 0.0
    assert hoelder.seminorm_Halpha(f, GAMMA, ALPHA) == 0.0


def test_hs_matches_brute_force_on_17cube():
    f = unit_slab(17, lambda XP, XN, T: XN)
    got = hoelder.seminorm_Hs(f, GAMMA, ALPHA)
    want = brute_hs(f, GAMMA, ALPHA)
    assert got == pytest.approx(want, rel=1e-12)


def test_hs_attains_one_on_quasi_distance_power():
    n = 9
    xp = np.linspace(0.0, 1.0, n)
    xN = np.linspace(0.0, 1.0, n)
    t = np.linspace(0.0, 1.0, 3)
    vals = np.empty((n, n, 3))
    for i, a in enumerate(xp):
        for j, b in enumerate(xN):
            vals[i, j, :] = hoelder.s_distance((a, b), (0.0, 0.0),
                                               ALPHA) ** GAMMA
    f = hoelder.SampledFunction(values=vals, x_prime=xp, x_N=xN, times=t)
    assert hoelder.seminorm_Hs(f, GAMMA, ALPHA) >= 1.0 - 1e-6


def test_halpha_matches_brute_force_for_tangential_coordinate():
    f = unit_slab(9, lambda XP, XN, T: XP)
    got = hoelder.seminorm_Halpha(f, GAMMA, ALPHA)
    want = brute_halpha(f, GAMMA, ALPHA)
    assert got == pytest.approx(want, rel=1e-12)
    # the unweighted block sups at the largest pair distance on the slab
    assert got >= 1.0


def test_halpha_time_only_function_is_zero():
    f = unit_slab(7, lambda XP, XN, T: T)
    assert hoelder.seminorm_Halpha(f, GAMMA, ALPHA) == 0.0
    assert hoelder.seminorm_Hs(f, GAMMA, ALPHA) == 0.0


def test_estimators_absolutely_homogeneous():
    rng = np.random.default_rng(11)
    f = unit_slab(9, lambda XP, XN, T: np.sin(3 * XP) * np.cos(2 * XN)
                  + 0.3 * T * XN)
    g = hoelder.SampledFunction(values=-3.7 * f.values, x_prime=f.x_prime,
                                x_N=f.x_N, times=f.times)
    for est in (hoelder.seminorm_Hs, hoelder.seminorm_Halpha):
        a, b = est(f, GAMMA, ALPHA), est(g, GAMMA, ALPHA)
        assert b == pytest.approx(3.7 * a, rel=1e-12)
    assert hoelder.time_holder(g, GAMMA / 2.0) == pytest.approx(
        3.7 * hoelder.time_holder(f, GAMMA / 2.0), rel=1e-12)


def test_estimators_monotone_in_sample_set():
    def fn(XP, XN, T):
        return np.sin(4 * XP + 1.0) * np.exp(-XN) + 0.2 * XN * T

    fine = unit_slab(17, fn)
    xp = fine.x_prime[::2]
    coarse = hoelder.SampledFunction(values=fine.values[::2, ::2, ::2],
                                     x_prime=xp, x_N=xp, times=xp)
    for est in (hoelder.seminorm_Hs, hoelder.seminorm_Halpha):
        assert est(coarse, GAMMA, ALPHA) <= est(fine, GAMMA, ALPHA) + 1e-14


def test_gamma_out_of_range_rejected():
    f = unit_slab(5, lambda XP, XN, T: XN)
    with pytest.raises(DomainError):
        hoelder.seminorm_Hs(f, 1.5, ALPHA)


# ---------------------------------------------------------------------------
# full weighted norm
# ---------------------------------------------------------------------------

def test_norm_report_zero_function():
    rep = hoelder.norm_Cs2gamma(unit_slab(7), GAMMA, ALPHA)
    assert rep.cs2gamma_total() == 0.0
    assert rep.sup_norm == 0.0


def test_norm_report_linear_in_normal():
    f = unit_slab(9, lambda XP, XN, T: XN)
    rep = hoelder.norm_Cs2gamma(f, GAMMA, ALPHA)
    assert rep.sup_norm == 1.0
    assert all(v == pytest.approx(0.0, abs=1e-12) for v in rep.d1_seminorms)
    assert all(v == pytest.approx(0.0, abs=1e-12)
               for v in rep.d2_weighted_seminorms)
    assert rep.dt_seminorm == pytest.approx(0.0, abs=1e-12)
    assert rep.H_s_gamma == pytest.approx(
        hoelder.seminorm_Hs(f, GAMMA, ALPHA), rel=1e-14)


def test_norm_report_weighted_second_derivative_brute_force():
    f = unit_slab(9, lambda XP, XN, T: XN ** 2)
    rep = hoelder.norm_Cs2gamma(f, GAMMA, ALPHA)
    # f_NN = 2 exactly on a uniform grid, so the weighted block is the
    # seminorm of 2 * x_N^alpha
    g = unit_slab(9, lambda XP, XN, T: 2.0 * XN ** ALPHA)
    want = brute_hs(g, GAMMA, ALPHA)
    assert rep.d2_weighted_seminorms[2] == pytest.approx(want, rel=1e-10)


def test_norm_report_text_round_trip():
    f = unit_slab(7, lambda XP, XN, T: np.sin(XP) * XN + T * XN ** 2)
    rep = hoelder.norm_Cs2gamma(f, GAMMA, ALPHA)
    back = hoelder.NormReport.from_text(rep.to_text())
    assert back == rep
    assert back.cs2gamma_total() == pytest.approx(rep.cs2gamma_total(),
                                                  rel=1e-15)


# ---------------------------------------------------------------------------
# interface norm
# ---------------------------------------------------------------------------

def _front(vals_fn, n_omega=16, n_t=9, T=1.0):
    om = np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False)
    t = np.linspace(0.0, T, n_t)
    OM, TT = np.meshgrid(om, t, indexing="ij")
    return geometry.InterfaceField(rho=vals_fn(OM, TT), omega=om, times=t)


def test_interface_norm_zero_front():
    rho = _front(lambda OM, TT: np.zeros_like(OM))
    assert hoelder.interface_parabolic_norm(rho, 0.15, ALPHA) == 0.0


def test_interface_norm_linear_in_time():
    rho = _front(lambda OM, TT: TT)
    # rho_t = 1 (sup block) plus the gamma/2 time block of rho itself,
    # which equals T^(1 - gamma/2) = 1 on the unit horizon; omega blocks
    # vanish
    val = hoelder.interface_parabolic_norm(rho, 0.15, ALPHA)
    assert val == pytest.approx(2.0, rel=1e-12)


def test_interface_norm_cosine_matches_brute_force():
    beta = 0.15
    ex = 1.0 + beta - ALPHA
    rho = _front(lambda OM, TT: np.cos(OM), n_t=5)
    n = rho.omega.size
    h = 2.0 * np.pi / n
    rho_om = (np.roll(rho.rho, -1, axis=0)
              - np.roll(rho.rho, 1, axis=0)) / (2.0 * h)
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(rho.omega[i] - rho.omega[j])
            d = min(d, 2.0 * np.pi - d)
            best = max(best, np.abs(rho_om[i] - rho_om[j]).max() / d**ex)
    want = float(np.abs(rho_om).max()) + best   # rho_t = 0 for this front
    got = hoelder.interface_parabolic_norm(rho, beta, ALPHA)
    assert got == pytest.approx(want, rel=1e-12)


def test_interface_norm_rejects_bad_exponents():
    rho = _front(lambda OM, TT: TT)
    with pytest.raises(DomainError):
        hoelder.interface_parabolic_norm(rho, 0.8, ALPHA)


# ---------------------------------------------------------------------------
# equivalence diagnostics
# ---------------------------------------------------------------------------

def test_equivalence_constant_function_degenerate():
    f = unit_slab(7, lambda XP, XN, T: np.ones_like(XP))
    with pytest.raises(DegenerateInput):
        hoelder.equivalence_report(f, GAMMA, ALPHA)


def test_equivalence_normal_coordinate_within_interval():
    f = unit_slab(9, lambda XP, XN, T: XN)
    rep = hoelder.equivalence_report(f, GAMMA, ALPHA)
    assert rep.c_star == 100.0
    assert 1e-2 <= rep.ratio <= 1e2
    assert rep.within_interval
    assert rep.ratio == pytest.approx(rep.H_alpha / rep.H_s, rel=1e-15)
