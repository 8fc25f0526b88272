"""Standard problem builders shared by the command line, demos and tests.

Each builder returns fully assembled problem data plus the reference
object (exact solution or manufactured target) used to judge the run.
"""

import numpy as np

from . import fd, geometry, hoelder, linear_pde, oracle, stefan_linear
from .errors import DomainError


def default_params(m=2.0, gamma=0.2, a_plus=1.0, a_minus=1.0, k=1.0,
                   eps=0.0, nu=0.1):
    return geometry.Params(m=m, gamma=gamma, a_plus=a_plus, a_minus=a_minus,
                           k=k, eps=eps, nu=nu)


def equilibrium_data(n_lam=200, n_t=201, T=1.0, params=None, geom=None,
                     outer_plus=1.0):
    """Stationary two-phase state on the segment; the front must not move."""
    from . import nonlinear
    if geom is None:
        geom = geometry.ReferenceGeometry(kind="segment1d", gamma0=0.4)
    if params is None:
        params = default_params()
    eq = oracle.stationary_equilibrium(geom, params.a_plus, params.a_minus,
                                       outer_plus)
    gp = geom.phase_grid("+", n_lam)
    gm = geom.phase_grid("-", n_lam)
    times = np.linspace(0.0, T, n_t)
    v0p = eq.v_side(gp.lam, "+")[:, None]
    v0m = eq.v_side(gm.lam, "-")[:, None]
    hp = np.full((1, n_t), eq.v_side(geom.L_plus, "+"))
    hm = np.full((1, n_t), eq.v_side(-geom.L_minus, "-"))
    data = nonlinear.StefanData(geom=geom, params=params, grid_plus=gp,
                                grid_minus=gm, times=times, v0_plus=v0p,
                                v0_minus=v0m, h_plus=hp, h_minus=hm)
    return data, eq


def near_equilibrium_data(n_lam=200, n_t=201, T=1.0, eta=0.1, params=None,
                          geom=None, outer_plus=1.0):
    """Equilibrium profiles with a smooth interior bump on the plus side.

    The bump is a smooth plateau window supported in the middle of the
    phase, identically zero near the interface and the outer boundary, so
    the perturbed data keep first-order corner compatibility exactly at
    the nodes while driving a genuine relaxation transient.
    """
    data, eq = equilibrium_data(n_lam=n_lam, n_t=n_t, T=T, params=params,
                                geom=geom, outer_plus=outer_plus)
    from . import nonlinear
    gp = data.grid_plus
    L = data.geom.L_plus
    bump = eta * eq.coef_plus * L \
        * geometry.tube_cutoff(gp.lam - 0.5 * L, 0.45 * L)
    v0p = data.v0_plus.copy()
    v0p[:, 0] = v0p[:, 0] + bump
    data = nonlinear.StefanData(
        geom=data.geom, params=data.params, grid_plus=gp,
        grid_minus=data.grid_minus, times=data.times, v0_plus=v0p,
        v0_minus=data.v0_minus, h_plus=data.h_plus, h_minus=data.h_minus)
    return data, eq


def traveling_wave_data(n_lam=200, n_t=None, T=0.25, m=2.0, c=1.0,
                        a_plus=1.0, k=1.0, geom=None):
    """One-phase wave moving into the empty minus phase at speed c.

    In the reference frame the front sits at rho(t) = -c t; the occupied
    plus profile is the exact wave sampled at the displaced points.
    """
    from . import nonlinear
    if geom is None:
        geom = geometry.ReferenceGeometry(kind="segment1d", gamma0=1.8,
                                          L_minus=4.0, L_plus=4.0)
    if n_t is None:
        n_t = n_lam // 2 + 1
    Xi = geom.L_plus + c * T + 0.5
    tw = oracle.traveling_wave_profile(m=m, a_plus=a_plus, k=k, c=c,
                                       Xi=Xi, n=4001)
    params = default_params(m=m, a_plus=a_plus, a_minus=1.0, k=k)
    gp = geom.phase_grid("+", n_lam)
    gm = geom.phase_grid("-", n_lam)
    times = np.linspace(0.0, T, n_t)
    v0p = tw.value(-gp.lam)[:, None]
    v0p[gp.interface_index] = 0.0
    hp = tw.value(-(geom.L_plus + c * times))[None, :]
    data = nonlinear.StefanData(
        geom=geom, params=params, grid_plus=gp, grid_minus=gm, times=times,
        v0_plus=v0p, v0_minus=np.zeros(gm.shape),
        h_plus=hp, h_minus=np.zeros((1, n_t)))
    return data, tw


def traveling_wave_error(sol, tw, data):
    """(relative field error, relative front error) against the wave.

    The numerical field is compared at the physical image of each node,
    reconstructed with the same extension operator the solver uses.
    """
    from . import nonlinear
    c = tw.c
    gp = data.grid_plus
    times = data.times
    ext = np.empty(gp.shape + (times.size,))
    for n in range(times.size):
        ext[..., n] = nonlinear._extend_stationary(sol.rho.rho[:, n],
                                                   data.geom, gp)
    y = gp.lam[:, None, None] + ext
    exact = tw.value(-(y + c * times[None, None, :]))
    err = np.abs(sol.v_plus.values - exact).max()
    rel_field = err / np.abs(exact).max()
    front_exact = -c * times[-1]
    rel_front = abs(sol.rho.rho[0, -1] - front_exact) / abs(front_exact)
    return float(rel_field), float(rel_front)


def annulus_geometry(gamma0=0.4):
    return geometry.ReferenceGeometry(kind="annulus2d", gamma0=gamma0,
                                      R_minus=0.5, R=1.0, R_plus=2.0)


def _be_diff(values, times, axis=-1):
    """Backward difference matching the implicit stepper (zero at t=0)."""
    out = np.zeros_like(values)
    vals = np.moveaxis(values, axis, -1)
    res = np.moveaxis(out, axis, -1)
    dt = np.diff(times)
    res[..., 1:] = np.diff(vals, axis=-1) / dt
    return out


def manufactured_linear_problem(geom=None, params=None, n_lam=25, n_omega=16,
                                n_t=21, T=0.5, eps=0.0, source_eps=None,
                                amplitude=0.1):
    """Linear interface problem whose exact discrete solution is known.

    Smooth target fields (v*, delta*) vanishing at t = 0 are substituted
    into the discrete operators of the linear solver, which yields
    sources (f1, f2) for which (v*, delta*) is the exact fixed point.
    source_eps controls the regularization used when building f2
    (defaults to eps); passing a different solve-time eps turns the
    instance into a regularization study with fixed data.
    """
    if geom is None:
        geom = annulus_geometry()
    if params is None:
        params = default_params(gamma=0.2)
    if source_eps is None:
        source_eps = eps
    if geom.kind == "segment1d":
        n_omega = 1
    gp = geom.phase_grid("+", n_lam, n_omega)
    gm = geom.phase_grid("-", n_lam, n_omega)
    times = np.linspace(0.0, T, n_t)
    omega = geom.omega_nodes(n_omega)
    tt = times[None, None, :]

    def target_field(grid):
        L = abs(grid.lam[grid.outer_index])
        lam = np.abs(grid.lam)[:, None, None]
        shape_om = (1.0 + 0.3 * np.cos(omega))[None, :, None] \
            if n_omega > 1 else 1.0
        return amplitude * tt * lam * (L - lam) / L**2 * shape_om

    vps = linear_pde.GridField(grid=gp, times=times,
                               values=target_field(gp))
    vms = linear_pde.GridField(grid=gm, times=times,
                               values=-target_field(gm))
    shape_d = (1.0 + 0.5 * np.cos(omega)) if n_omega > 1 else np.ones(1)
    delta_rho = amplitude * shape_d[:, None] * times[None, :]
    delta_star = geometry.InterfaceField(rho=delta_rho, omega=omega,
                                         times=times)
    p = stefan_linear.LinearStefanProblem(
        geom=geom, params=params, grid_plus=gp, grid_minus=gm, times=times,
        A_plus=1.0, A_minus=1.0, B_plus=1.0, B_minus=1.0, eps=eps)

    # volume sources: substitute the targets into the discrete phase
    # operator, including the front coupling term
    f1 = {}
    for side, vs in (("+", vps), ("-", vms)):
        grid = p.grid(side)
        weight = p.weight(side)
        de = geometry.extend_interface_field(delta_star, geom, side,
                                             grid=grid)
        lap = linear_pde.laplacian_matrix(grid)
        lap_v = np.empty_like(vs.values)
        lap_de = np.empty_like(de.values)
        for n in range(n_t):
            lap_v[..., n] = (lap @ vs.values[..., n].reshape(-1)) \
                .reshape(grid.shape)
            lap_de[..., n] = (lap @ de.values[..., n].reshape(-1)) \
                .reshape(grid.shape)
        de_t = fd.deriv(de.values, times, axis=2)
        A = p.A_plus if side == "+" else p.A_minus
        f1[side] = _be_diff(vs.values, times) - weight * lap_v \
            - A * (de_t - weight * lap_de)

    # interface source: substitute into the discrete front law
    a_p, a_m = params.a_plus, params.a_minus
    flux = a_p * vps.interface_normal_deriv(p=params.front_exponent) \
        - a_m * vms.interface_normal_deriv(p=params.front_exponent)
    dlams = []
    for side in ("+", "-"):
        grid = p.grid(side)
        de = geometry.extend_interface_field(delta_star, geom, side,
                                             grid=grid)
        dlams.append(fd.one_sided_deriv_at(de.values, grid.h_lam, axis=0,
                                           end=grid.interface_end))
    dlam = 0.5 * (dlams[0] + dlams[1])
    ip, im = gp.interface_index, gm.interface_index
    A_jump = a_p * p.A_plus[ip] - a_m * p.A_minus[im]
    beltrami = stefan_linear.laplace_beltrami(delta_star.rho, geom)
    f2 = params.k * _be_diff(delta_star.rho, times) \
        - source_eps * beltrami + flux - dlam * A_jump
    p.f1_plus = f1["+"]
    p.f1_minus = f1["-"]
    p.f2 = f2
    return p, delta_star, vps, vms


def norm_corpus(n_funcs=20, n=17, seed=20240817):
    """Random trigonometric polynomials on the unit slab.

    The coefficient draw depends only on the seed, so the same continuum
    functions are sampled at every resolution n.
    """
    rng = np.random.default_rng(seed)
    xp = np.linspace(0.0, 1.0, n)
    xN = np.linspace(0.0, 1.0, n)
    t = np.linspace(0.0, 1.0, n)
    XP, XN, T = np.meshgrid(xp, xN, t, indexing="ij")
    corpus = []
    for _ in range(n_funcs):
        vals = np.zeros((n, n, n))
        for _ in range(4):
            amp = rng.normal()
            kp, kN, kt = rng.integers(0, 3, size=3)
            php, phN, pht = rng.uniform(0, 2 * np.pi, size=3)
            vals += amp * np.cos(np.pi * kp * XP + php) \
                * np.cos(np.pi * kN * XN + phN) \
                * np.cos(np.pi * kt * T + pht)
        corpus.append(hoelder.SampledFunction(values=vals, x_prime=xp,
                                              x_N=xN, times=t))
    return corpus


def random_interface_fields(n_fields=10, n_omega=16, n_t=9, T=1.0,
                            amplitude=0.05, seed=20240818):
    """Random periodic front deviations vanishing at t = 0."""
    rng = np.random.default_rng(seed)
    omega = np.linspace(0.0, 2.0 * np.pi, n_omega, endpoint=False)
    times = np.linspace(0.0, T, n_t)
    fields = []
    for _ in range(n_fields):
        rho = np.zeros((n_omega, n_t))
        for _ in range(3):
            amp = amplitude * rng.normal()
            kw = rng.integers(0, 4)
            ph = rng.uniform(0, 2 * np.pi)
            rho += amp * np.cos(kw * omega[:, None] + ph) \
                * (times[None, :] / T)
        fields.append(geometry.InterfaceField(rho=rho, omega=omega,
                                              times=times))
    return fields


SCENARIOS = ("equilibrium", "traveling_wave", "custom",
             "linear_stefan_mms", "norm_lab", "model_problem")


def check_scenario(name):
    if name not in SCENARIOS:
        raise DomainError(f"unknown scenario {name!r}")
