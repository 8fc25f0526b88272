"""Degenerate-parabolic engine: exactness, maximum principle, convergence."""

import numpy as np
import pytest

from stefan_pme import fd, linear_pde, oracle
from stefan_pme.errors import ShapeMismatch

ALPHA = 0.5


def segment_grid(n_lam=33, L=1.0):
    return linear_pde.PhaseGrid(lam=np.linspace(0.0, L, n_lam))


def degenerate_problem(grid, times, source, f, h, initial=None):
    weight = np.abs(grid.lam)[:, None, None] ** ALPHA
    return linear_pde.DegenerateProblem(
        grid=grid, times=times, weight=weight, source=source,
        interface_data=f, outer_data=h, initial=initial)


# ---------------------------------------------------------------------------
# exact special cases
# ---------------------------------------------------------------------------

def test_zero_data_gives_zero_solution():
    grid = segment_grid(17)
    times = np.linspace(0.0, 1.0, 9)
    p = degenerate_problem(grid, times, 0.0, 0.0, 0.0)
    sol = linear_pde.solve_degenerate_dirichlet(p)
    assert np.all(sol.values == 0.0)


def test_constant_data_is_exact():
    grid = segment_grid(17)
    times = np.linspace(0.0, 1.0, 9)
    p = degenerate_problem(grid, times, 0.0, 1.0, 1.0,
                           initial=np.ones(grid.shape))
    sol = linear_pde.solve_degenerate_dirichlet(p)
    assert np.abs(sol.values - 1.0).max() < 1e-12


def test_zero_class_preservation_exact():
    grid = segment_grid(17)
    times = np.linspace(0.0, 1.0, 11)
    src = np.zeros(grid.shape + (11,))
    f = np.zeros((1, 11))
    src[..., 6:] = 1.0
    f[:, 6:] = 0.5
    p = degenerate_problem(grid, times, src, f, 0.0)
    sol = linear_pde.solve_degenerate_dirichlet(p)
    assert np.all(sol.values[..., :6] == 0.0)
    assert np.abs(sol.values[..., 6:]).max() > 0.0


def test_zero_class_flag_rejects_nonzero_start():
    grid = segment_grid(9)
    times = np.linspace(0.0, 1.0, 5)
    with pytest.raises(ShapeMismatch):
        linear_pde.DegenerateProblem(
            grid=grid, times=times, weight=np.abs(grid.lam)[:, None, None],
            source=0.0, interface_data=1.0, outer_data=0.0, zero_class=True)


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

def _mms_error(n_lam, n_t, time_power=1.0, T=0.5):
    """Error against u* = t^q sin(pi lam) with the analytic source."""
    grid = segment_grid(n_lam)
    times = np.linspace(0.0, T, n_t)
    lam = grid.lam[:, None, None]
    tt = times[None, None, :]
    exact = tt ** time_power * np.sin(np.pi * lam)
    du_dt = time_power * tt ** max(time_power - 1.0, 0.0) * np.sin(np.pi * lam)
    if time_power == 1.0:
        du_dt = np.broadcast_to(np.sin(np.pi * lam), exact.shape)
    g = du_dt + lam ** ALPHA * np.pi ** 2 * tt ** time_power \
        * np.sin(np.pi * lam)
    p = degenerate_problem(grid, times, g, 0.0, 0.0)
    sol = linear_pde.solve_degenerate_dirichlet(p)
    return float(np.abs(sol.values - exact).max())


def test_mms_error_decreases_under_spatial_refinement():
    errs = [_mms_error(n, 41) for n in (17, 33, 65)]
    assert errs[2] < errs[1] < errs[0]


def test_halfspace_manufactured_solution():
    from stefan_pme.cli import _model_problem_instance
    err = _model_problem_instance(ALPHA, 33, 17, 17, 1.0)
    assert err < 5e-3


def test_halfspace_zero_and_constant_trace():
    slab = linear_pde.halfspace_slab(4.0, 1.0, 17, 9)
    times = np.linspace(0.0, 1.0, 9)
    zero = linear_pde.solve_halfspace_model(
        np.zeros((9, 9)), np.zeros(slab.shape + (9,)), ALPHA, slab, times)
    assert np.all(zero.values == 0.0)
    phi = times[None, :] * np.ones((slab.n_omega, 1))
    sol = linear_pde.solve_halfspace_model(
        phi, np.zeros(slab.shape + (9,)), ALPHA, slab, times)
    # Dirichlet row imposes the trace exactly (side walls stay at zero)
    assert np.abs(sol.values[0, 1:-1, :] - phi[1:-1]).max() < 1e-13


# ---------------------------------------------------------------------------
# structural properties
# ---------------------------------------------------------------------------

def _random_problem(rng, harmonic=False):
    kind = rng.choice(["segment", "annulus"])
    n_lam = int(rng.integers(8, 18))
    n_t = int(rng.integers(5, 10))
    if kind == "segment":
        grid = linear_pde.PhaseGrid(lam=np.linspace(0.0, 1.0, n_lam))
    else:
        n_omega = int(rng.integers(4, 9))
        grid = linear_pde.PhaseGrid(
            lam=np.linspace(0.0, 1.0, n_lam),
            omega=np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False),
            kind="annulus", R=1.0)
    times = np.linspace(0.0, rng.uniform(0.2, 1.5), n_t)
    B = rng.uniform(0.2, 5.0, size=grid.shape + (n_t,))
    weight = np.abs(grid.lam)[:, None, None] ** ALPHA * B
    f = rng.normal(size=(grid.n_omega, n_t))
    h = rng.normal(size=(grid.n_omega, n_t))
    initial = rng.normal(size=grid.shape)
    initial[grid.interface_index] = f[:, 0]
    initial[grid.outer_index] = h[:, 0]
    p = linear_pde.DegenerateProblem(
        grid=grid, times=times, weight=weight, source=0.0,
        interface_data=f, outer_data=h, initial=initial)
    return p


def test_discrete_maximum_principle_randomized():
    rng = np.random.default_rng(20240820)
    for _ in range(20):
        p = _random_problem(rng)
        sol = linear_pde.solve_degenerate_dirichlet(p)
        lo = min(p.interface_data.min(), p.outer_data.min(),
                 p.initial.min(), 0.0 if p.grid.omega_dirichlet else np.inf)
        hi = max(p.interface_data.max(), p.outer_data.max(), p.initial.max())
        assert sol.values.min() >= lo - 1e-12
        assert sol.values.max() <= hi + 1e-12


def test_comparison_monotonicity():
    rng = np.random.default_rng(5)
    grid = segment_grid(17)
    times = np.linspace(0.0, 1.0, 9)
    f1 = rng.uniform(0.0, 1.0, size=(1, 9))
    h1 = rng.uniform(0.0, 1.0, size=(1, 9))
    init1 = rng.uniform(0.0, 1.0, size=grid.shape)
    init1[grid.interface_index] = f1[:, 0]
    init1[grid.outer_index] = h1[:, 0]
    p1 = degenerate_problem(grid, times, 0.0, f1, h1, initial=init1)
    p2 = degenerate_problem(grid, times, 0.0, f1 + 0.5, h1 + 0.5,
                            initial=init1 + 0.5)
    u1 = linear_pde.solve_degenerate_dirichlet(p1).values
    u2 = linear_pde.solve_degenerate_dirichlet(p2).values
    assert np.all(u1 <= u2 + 1e-12)


def test_solver_superposition():
    rng = np.random.default_rng(6)
    grid = segment_grid(17)
    times = np.linspace(0.0, 1.0, 9)

    def rand_data():
        g = rng.normal(size=grid.shape + (9,))
        f = rng.normal(size=(1, 9))
        h = rng.normal(size=(1, 9))
        return g, f, h

    (ga, fa, ha), (gb, fb, hb) = rand_data(), rand_data()
    ua = linear_pde.solve_degenerate_dirichlet(
        degenerate_problem(grid, times, ga, fa, ha)).values
    ub = linear_pde.solve_degenerate_dirichlet(
        degenerate_problem(grid, times, gb, fb, hb)).values
    uab = linear_pde.solve_degenerate_dirichlet(
        degenerate_problem(grid, times, 2 * ga - gb, 2 * fa - fb,
                           2 * ha - hb)).values
    scale = max(1.0, np.abs(uab).max())
    assert np.abs(uab - (2 * ua - ub)).max() / scale < 1e-10


# ---------------------------------------------------------------------------
# harmonic extension
# ---------------------------------------------------------------------------

def test_harmonic_extension_zero_and_ramp():
    grid = segment_grid(33, L=1.0)
    zero = linear_pde.harmonic_extension(np.zeros((1, 3)), grid)
    assert np.all(zero.values == 0.0)
    one = linear_pde.harmonic_extension(np.ones((1, 2)), grid)
    ramp = 1.0 - grid.lam
    assert np.abs(one.values[:, 0, 0] - ramp).max() < 1e-12


def test_harmonic_extension_annulus_separable_mode():
    R, Rp = 1.0, 2.0
    n_lam, n_omega = 65, 64
    grid = linear_pde.PhaseGrid(
        lam=np.linspace(0.0, Rp - R, n_lam),
        omega=np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False),
        kind="annulus", R=R)
    f = np.cos(grid.omega)[:, None]
    sol = linear_pde.harmonic_extension(f, grid)
    # closed form A(r) cos(omega) with A = a r + b / r, A(R)=1, A(Rp)=0
    r = grid.radius()
    a = -1.0 / (Rp**2 / R - R)
    b = -a * Rp**2
    exact = (a * r + b / r)[:, None] * np.cos(grid.omega)[None, :]
    assert np.abs(sol.values[..., 0] - exact).max() < 2e-3


def test_harmonic_extension_maximum_principle():
    rng = np.random.default_rng(9)
    grid = linear_pde.PhaseGrid(
        lam=np.linspace(0.0, 1.0, 17),
        omega=np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False),
        kind="annulus", R=1.0)
    for _ in range(5):
        f = rng.normal(size=(12, 3))
        sol = linear_pde.harmonic_extension(f, grid)
        assert np.abs(sol.values).max() <= np.abs(f).max() + 1e-12


# ---------------------------------------------------------------------------
# fields and stencils
# ---------------------------------------------------------------------------

def test_grid_field_text_round_trip_exact():
    rng = np.random.default_rng(10)
    grid = linear_pde.PhaseGrid(
        lam=np.linspace(0.0, 1.0, 7),
        omega=np.linspace(0.0, 2.0 * np.pi, 5, endpoint=False),
        kind="annulus", R=1.0)
    gf = linear_pde.GridField(grid=grid, times=np.linspace(0.0, 0.3, 4),
                              values=rng.normal(size=(7, 5, 4)))
    back = linear_pde.GridField.from_text(gf.to_text())
    assert np.array_equal(back.values, gf.values)
    assert np.array_equal(back.grid.lam, grid.lam)
    assert back.grid.kind == "annulus"


def test_interface_normal_deriv_polynomial_and_fitted():
    grid = segment_grid(21)
    times = np.linspace(0.0, 1.0, 3)
    vals = np.broadcast_to((2.0 + 3.0 * grid.lam)[:, None, None],
                           (21, 1, 3)).copy()
    gf = linear_pde.GridField(grid=grid, times=times, values=vals)
    assert np.abs(gf.interface_normal_deriv() - 3.0).max() < 1e-12
    assert np.abs(gf.interface_normal_deriv(p=1.5) - 3.0).max() < 1e-12
    # fitted stencil is exact on the degenerate front shape s*d + C*d^p
    p = 1.5
    prof = 0.7 * grid.lam + 2.0 * grid.lam ** p
    gf2 = linear_pde.GridField(
        grid=grid, times=times,
        values=np.broadcast_to(prof[:, None, None], (21, 1, 3)).copy())
    assert np.abs(gf2.interface_normal_deriv(p=p) - 0.7).max() < 1e-10


def test_fitted_interface_slope_validates_exponent():
    with pytest.raises(ValueError):
        fd.fitted_interface_slope(np.zeros(5), 0.1, axis=0, end="first",
                                  p=2.5)
    with pytest.raises(ValueError):
        fd.fitted_interface_slope(np.zeros(5), 0.1, axis=0, end="middle",
                                  p=1.5)
