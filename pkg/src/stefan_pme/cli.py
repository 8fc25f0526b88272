"""Command line front end: config ingestion, scenario runs, reports.

Subcommands
-----------
run    execute one scenario from a config file and write artifacts
sweep  re-run a scenario along a refinement axis (grid, epsilon, horizon)
norms  print the weighted-norm report of a stored field snapshot

Config files use INI sections; every recognized key is listed in _SCHEMA.
Unknown or missing required keys raise ConfigError naming the full key
path.  All emitted floats use 17 significant digits so artifacts round
trip bit-exactly.  Exit codes: 0 ok, 2 config error, 3 solver failure,
4 acceptance-check failure.
"""

import argparse
import configparser
import io
import os
import sys

import numpy as np

from . import (fd, geometry, hoelder, linear_pde, nonlinear, oracle,
               scenarios, stefan_linear)
from .errors import ConfigError, StefanPmeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4

_REQUIRED = object()

_SCHEMA = {
    "scenario": {"name": (str, _REQUIRED), "c": (float, 1.0)},
    "geometry": {"kind": (str, "segment1d"), "gamma0": (float, 0.4),
                 "L_minus": (float, 1.0), "L_plus": (float, 1.0),
                 "R_minus": (float, 0.5), "R": (float, 1.0),
                 "R_plus": (float, 2.0)},
    "params": {"m": (float, _REQUIRED), "gamma": (float, _REQUIRED),
               "k": (float, _REQUIRED), "a_plus": (float, 1.0),
               "a_minus": (float, 1.0), "eps": (float, 0.0),
               "nu": (float, 0.1)},
    "grid": {"n_lam": (int, 200), "n_omega": (int, 1), "n_t": (int, 201),
             "T": (float, 1.0)},
    "solver": {"mode": (str, "paper_faithful"), "tol": (float, 1e-7),
               "max_iter": (int, 60), "inner_tol": (float, 1e-8),
               "inner_max_iter": (int, 80), "check_tolerance": (float, 0.02)},
    "output": {"directory": (str, "out"), "formats": (str, "csv,txt")},
    "custom": {"eta": (float, 0.1)},
    "norm_lab": {"n_funcs": (int, 20), "n": (int, 17),
                 "seed": (int, 20240817)},
}


def parse_config(text):
    """INI text -> nested {section: {key: typed value}} with defaults.

    Unknown sections or keys and missing required keys raise ConfigError
    naming the full key path (for example "params.k").
    """
    ini = configparser.ConfigParser()
    ini.optionxform = str
    try:
        ini.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = {}
    present = {}
    for section in ini.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section {section!r}")
        present[section] = True
        for key in ini[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, keys in _SCHEMA.items():
        block = {}
        for key, (cast, default) in keys.items():
            if ini.has_option(section, key):
                raw = ini.get(section, key)
                try:
                    block[key] = cast(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for {section}.{key}: {raw!r}") from exc
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                block[key] = default
        cfg[section] = block
    cfg["_explicit_geometry"] = "geometry" in present
    _validate(cfg)
    return cfg


def _validate(cfg):
    name = cfg["scenario"]["name"]
    if name not in scenarios.SCENARIOS:
        raise ConfigError(f"unknown scenario.name {name!r}")
    g = cfg["grid"]
    if g["n_lam"] < 5 or g["n_t"] < 5:
        raise ConfigError("grid.n_lam and grid.n_t must be >= 5")
    if g["T"] <= 0.0:
        raise ConfigError("grid.T must be positive")
    if cfg["solver"]["mode"] not in ("paper_faithful", "marching"):
        raise ConfigError("solver.mode must be paper_faithful or marching")
    try:
        _params_from(cfg)
    except StefanPmeError as exc:
        raise ConfigError(f"params block invalid: {exc}") from exc


def serialize_config(cfg):
    """Inverse of parse_config on recognized keys (round-trip identity)."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            val = cfg[section][key]
            txt = f"{val:.17g}" if isinstance(val, float) else str(val)
            lines.append(f"{key} = {txt}")
        lines.append("")
    return "\n".join(lines)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def default_config(scenario="equilibrium"):
    """Complete config text for a scenario, all keys at their defaults."""
    cfg = {section: {key: (None if default is _REQUIRED else default)
                     for key, (cast, default) in keys.items()}
           for section, keys in _SCHEMA.items()}
    cfg["scenario"]["name"] = scenario
    cfg["params"].update(m=2.0, gamma=0.2, k=1.0)
    if scenario == "traveling_wave":
        cfg["grid"].update(T=0.25, n_t=101)
        cfg["solver"]["mode"] = "marching"
    if scenario == "linear_stefan_mms":
        cfg["grid"].update(n_lam=25, n_omega=16, n_t=11, T=0.02)
    if scenario == "model_problem":
        cfg["grid"].update(n_lam=33, n_omega=9, n_t=17, T=1.0)
    return serialize_config(cfg)


def _params_from(cfg):
    p = cfg["params"]
    return geometry.Params(m=p["m"], gamma=p["gamma"], a_plus=p["a_plus"],
                           a_minus=p["a_minus"], k=p["k"], eps=p["eps"],
                           nu=p["nu"])


def _geometry_from(cfg):
    g = cfg["geometry"]
    return geometry.ReferenceGeometry(
        kind=g["kind"], gamma0=g["gamma0"], L_minus=g["L_minus"],
        L_plus=g["L_plus"], R_minus=g["R_minus"], R=g["R"],
        R_plus=g["R_plus"])


# ---------------------------------------------------------------------------
# scenario runners: each returns a results dict consumed by emit_report
# ---------------------------------------------------------------------------

def _solve_outer(data, cfg):
    s = cfg["solver"]
    return nonlinear.outer_solve(
        data, mode=s["mode"], eps=cfg["params"]["eps"], tol=s["tol"],
        max_outer=s["max_iter"], inner_tol=s["inner_tol"],
        inner_max_iter=s["inner_max_iter"])


def _front_results(sol, times):
    rho = sol.rho.rho
    return {"times": times, "rho": rho,
            "front_sup": rho.max(axis=0), "front_inf": rho.min(axis=0)}


def _run_equilibrium(cfg):
    geom = _geometry_from(cfg) if cfg["_explicit_geometry"] else None
    data, eq = scenarios.equilibrium_data(
        n_lam=cfg["grid"]["n_lam"], n_t=cfg["grid"]["n_t"],
        T=cfg["grid"]["T"], params=_params_from(cfg), geom=geom)
    sol = _solve_outer(data, cfg)
    res = _front_results(sol, data.times)
    res["fields"] = {"v_plus": sol.v_plus, "v_minus": sol.v_minus}
    res["iterations"] = getattr(sol, "iterations", [])
    res["metrics"] = {"front_drift": float(np.abs(sol.rho.rho).max())}
    return res


def _run_custom(cfg):
    geom = _geometry_from(cfg) if cfg["_explicit_geometry"] else None
    data, eq = scenarios.near_equilibrium_data(
        n_lam=cfg["grid"]["n_lam"], n_t=cfg["grid"]["n_t"],
        T=cfg["grid"]["T"], eta=cfg["custom"]["eta"],
        params=_params_from(cfg), geom=geom)
    sol = _solve_outer(data, cfg)
    res = _front_results(sol, data.times)
    res["fields"] = {"v_plus": sol.v_plus, "v_minus": sol.v_minus}
    res["iterations"] = getattr(sol, "iterations", [])
    res["metrics"] = {"front_drift": float(np.abs(sol.rho.rho).max())}
    return res


def _run_traveling_wave(cfg):
    geom = _geometry_from(cfg) if cfg["_explicit_geometry"] else None
    par = cfg["params"]
    data, tw = scenarios.traveling_wave_data(
        n_lam=cfg["grid"]["n_lam"], n_t=cfg["grid"]["n_t"],
        T=cfg["grid"]["T"], m=par["m"], c=cfg["scenario"]["c"],
        a_plus=par["a_plus"], k=par["k"], geom=geom)
    sol = _solve_outer(data, cfg)
    field_err, front_err = scenarios.traveling_wave_error(sol, tw, data)
    res = _front_results(sol, data.times)
    res["fields"] = {"v_plus": sol.v_plus, "v_minus": sol.v_minus}
    res["iterations"] = getattr(sol, "iterations", [])
    res["metrics"] = {"observed_field_error": field_err,
                      "observed_front_error": front_err,
                      "wave_speed": tw.c}
    res["check"] = ("front error vs oracle",
                    front_err <= cfg["solver"]["check_tolerance"])
    return res


def _run_linear_stefan_mms(cfg, source_eps=None):
    geom = _geometry_from(cfg) if cfg["_explicit_geometry"] else None
    p, delta_star, vps, vms = scenarios.manufactured_linear_problem(
        geom=geom, params=_params_from(cfg), n_lam=cfg["grid"]["n_lam"],
        n_omega=cfg["grid"]["n_omega"], n_t=cfg["grid"]["n_t"],
        T=cfg["grid"]["T"], eps=cfg["params"]["eps"], source_eps=source_eps)
    sol = stefan_linear.solve_linear_stefan(
        p, tol=cfg["solver"]["inner_tol"],
        max_iter=cfg["solver"]["inner_max_iter"])
    err = float(np.abs(sol.delta.rho - delta_star.rho).max())
    verr = float(max(np.abs(sol.v_plus.values - vps.values).max(),
                     np.abs(sol.v_minus.values - vms.values).max()))
    qs = sol.contraction_factors()
    res = {"times": p.times, "rho": sol.delta.rho,
           "front_sup": sol.delta.rho.max(axis=0),
           "front_inf": sol.delta.rho.min(axis=0),
           "fields": {"v_plus": sol.v_plus, "v_minus": sol.v_minus},
           "iterations": sol.iterations,
           "metrics": {"front_error": err, "field_error": verr,
                       "q_first": qs[0] if qs else float("nan"),
                       "q_max": max(qs) if qs else float("nan")},
           "linear_log_csv": sol.log_csv(), "delta": sol.delta}
    return res


def _run_norm_lab(cfg):
    par = _params_from(cfg)
    nl = cfg["norm_lab"]
    corpus = scenarios.norm_corpus(n_funcs=nl["n_funcs"], n=nl["n"],
                                   seed=nl["seed"])
    ratios = []
    sups = []
    for f in corpus:
        rep = hoelder.equivalence_report(f, par.gamma, par.alpha)
        ratios.append(rep.ratio)
        sups.append(float(np.abs(f.values).max()))
    res = {"metrics": {"ratio_min": min(ratios), "ratio_max": max(ratios),
                       "n_functions": float(len(corpus))},
           "norm_entries": {f"ratio_{i}": r for i, r in enumerate(ratios)},
           "trivial": all(s == 0.0 for s in sups)}
    return res


def _model_problem_instance(alpha, n_deep, n_wide, n_t, T):
    """Manufactured half-space run u* = t x_N e^{-x_N} cos(x_1)."""
    slab = linear_pde.halfspace_slab(6.0, np.pi / 2.0, n_deep, n_wide)
    times = np.linspace(0.0, T, n_t)
    xN = slab.lam[:, None, None]
    x1 = slab.omega[None, :, None]
    tt = times[None, None, :]
    exact = tt * xN * np.exp(-xN) * np.cos(x1)
    g = (xN * np.exp(-xN) * np.cos(x1)
         + 2.0 * tt * xN ** alpha * np.exp(-xN) * np.cos(x1))
    f = np.zeros((slab.n_omega, n_t))
    outer = exact[slab.outer_index]
    sol = linear_pde.solve_halfspace_model(f, g, alpha, slab, times,
                                           outer_data=outer)
    return float(np.abs(sol.values - exact).max())


def _run_model_problem(cfg):
    par = _params_from(cfg)
    g = cfg["grid"]
    err = _model_problem_instance(par.alpha, g["n_lam"],
                                  max(g["n_omega"], 5), g["n_t"], g["T"])
    return {"metrics": {"max_error": err}}


_RUNNERS = {
    "equilibrium": _run_equilibrium,
    "traveling_wave": _run_traveling_wave,
    "custom": _run_custom,
    "linear_stefan_mms": _run_linear_stefan_mms,
    "norm_lab": _run_norm_lab,
    "model_problem": _run_model_problem,
}


# ---------------------------------------------------------------------------
# artifacts and reports
# ---------------------------------------------------------------------------

def _front_csv(res):
    rho = res["rho"]
    n_omega = rho.shape[0]
    buf = io.StringIO()
    cols = ",".join(f"rho_{i}" for i in range(n_omega))
    buf.write(f"t,{cols},sup,inf\n")
    for n, t in enumerate(res["times"]):
        vals = ",".join(f"{rho[i, n]:.17g}" for i in range(n_omega))
        buf.write(f"{t:.17g},{vals},{res['front_sup'][n]:.17g},"
                  f"{res['front_inf'][n]:.17g}\n")
    return buf.getvalue()


def _iterations_csv(iterations):
    buf = io.StringIO()
    buf.write("iter,update,q,rhs_sup,cross_check\n")
    for it in iterations:
        vals = []
        for v in it[1:]:
            vals.append(f"{v:.17g}" if v == v else "nan")
        buf.write(f"{it[0]}," + ",".join(vals) + "\n")
    return buf.getvalue()


def emit_report(results):
    """(human-readable text, machine csv) from a results dict.

    The csv schema is two columns, key and value, one metric per row;
    iteration-level data live in iterations.csv instead.
    """
    lines = ["run report", "=========="]
    rows = []
    for key, val in sorted(results.get("metrics", {}).items()):
        lines.append(f"{key}: {val:.6g}")
        rows.append((key, val))
    its = results.get("iterations", [])
    qs = [it[2] for it in its if len(it) > 2 and it[2] == it[2]]
    if qs:
        lines.append("contraction factors per outer iteration: "
                     + ", ".join(f"{q:.4f}" for q in qs))
        for i, q in enumerate(qs):
            rows.append((f"q_{i + 1}", q))
    crosses = [it[4] for it in its if len(it) > 4]
    if crosses:
        lines.append(f"max interface cross-check error: {max(crosses):.3e}")
        rows.append(("cross_check_max", max(crosses)))
    for key, val in sorted(results.get("norm_entries", {}).items()):
        rows.append((key, val))
    if "order" in results:
        fit = results["order"]
        lines.append(f"observed order: {fit.order:.4f} "
                     f"(pairwise: {', '.join(f'{p:.4f}' for p in fit.pairwise)})")
        rows.append(("order", fit.order))
        for i, p in enumerate(fit.pairwise):
            rows.append((f"order_pair_{i}", p))
    for key, val in sorted(results.get("sweep_entries", {}).items()):
        lines.append(f"{key}: {val:.6g}")
        rows.append((key, val))
    if results.get("trivial"):
        lines.append("trivial run: all norm entries are zero")
        rows.append(("trivial_run", 1.0))
    if "check" in results:
        name, ok = results["check"]
        lines.append(f"acceptance check [{name}]: "
                     + ("pass" if ok else "FAIL"))
        rows.append(("check_passed", 1.0 if ok else 0.0))
    csv_buf = io.StringIO()
    csv_buf.write("key,value\n")
    for key, val in rows:
        csv_buf.write(f"{key},{val:.17g}\n")
    return "\n".join(lines) + "\n", csv_buf.getvalue()


def write_artifacts(results, outdir, formats=("csv", "txt")):
    os.makedirs(outdir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            fh.write(text)
        written.append(path)

    if "rho" in results and "csv" in formats:
        put("front.csv", _front_csv(results))
    if "iterations" in results and results["iterations"] \
            and "csv" in formats:
        put("iterations.csv", _iterations_csv(results["iterations"]))
    if "linear_log_csv" in results and "csv" in formats:
        put("linear_iterations.csv", results["linear_log_csv"])
    if "fields" in results and "txt" in formats:
        for name, gf in results["fields"].items():
            put(f"{name}.txt", gf.to_text())
    text, csv_text = emit_report(results)
    put("report.txt", text)
    if "csv" in formats:
        put("report.csv", csv_text)
    return written


# ---------------------------------------------------------------------------
# subcommand drivers
# ---------------------------------------------------------------------------

def run_scenario(cfg, out_override=None, seed=None):
    """Execute one scenario and write artifacts; returns (exit code, dict)."""
    if seed is not None:
        np.random.seed(seed % 2**32)
    name = cfg["scenario"]["name"]
    results = _RUNNERS[name](cfg)
    outdir = out_override or cfg["output"]["directory"]
    formats = tuple(x.strip()
                    for x in cfg["output"]["formats"].split(",") if x.strip())
    results["artifacts"] = write_artifacts(results, outdir, formats)
    code = EXIT_OK
    if "check" in results and not results["check"][1]:
        code = EXIT_CHECK
    return code, results


def _sweep_point(args):
    cfg, axis, index = args
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in cfg.items()}
    name = cfg["scenario"]["name"]
    if axis == "grid":
        factor = 2 ** index
        cfg["grid"]["n_lam"] = cfg["grid"]["n_lam"] * factor
        cfg["grid"]["n_t"] = (cfg["grid"]["n_t"] - 1) * factor + 1
        h = 1.0 / cfg["grid"]["n_lam"]
        res = _RUNNERS[name](cfg)
        err = res["metrics"].get("observed_front_error",
                                 res["metrics"].get("front_error",
                                                    res["metrics"].get(
                                                        "max_error")))
        return ("grid", h, err, res["metrics"])
    if axis == "epsilon":
        eps = cfg["params"]["eps"] / 10.0 ** index
        cfg["params"]["eps"] = eps
        if name != "linear_stefan_mms":
            raise ConfigError("epsilon sweeps need scenario linear_stefan_mms")
        res = _run_linear_stefan_mms(cfg, source_eps=0.0)
        return ("epsilon", eps, res["delta"].rho, res["metrics"])
    if axis == "horizon":
        factor = 2.0 ** index
        cfg["grid"]["T"] = cfg["grid"]["T"] / factor
        cfg["grid"]["n_t"] = max(5, (cfg["grid"]["n_t"] - 1) // int(factor)
                                 + 1)
        res = _RUNNERS[name](cfg)
        its = res.get("iterations", [])
        qs = [it[2] for it in its if len(it) > 2 and it[2] == it[2]]
        f0 = its[0][3] if its and len(its[0]) > 3 else float("nan")
        return ("horizon", cfg["grid"]["T"],
                qs[0] if qs else float("nan"), {"f0": f0})
    raise ConfigError(f"unknown sweep axis {axis!r}")


def worker_count(points):
    """Worker cap from STEFAN_PME_THREADS (default 1, never above points)."""
    try:
        cap = int(os.environ.get("STEFAN_PME_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(points, cap))


def run_sweep(cfg, axis, points, out_override=None):
    """Refinement sweep along one axis; emits a summary report."""
    if points < 2:
        raise ConfigError("sweep needs --points >= 2")
    jobs = [(cfg, axis, i) for i in range(points)]
    n_workers = worker_count(points)
    if n_workers > 1:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(n_workers) as pool:
            outs = list(pool.map(_sweep_point, jobs))
    else:
        outs = [_sweep_point(j) for j in jobs]
    results = {"metrics": {}, "sweep_entries": {}}
    if axis == "grid":
        runs = [(h, e) for _, h, e, _ in outs]
        for i, (h, e) in enumerate(runs):
            results["sweep_entries"][f"h_{i}"] = h
            results["sweep_entries"][f"error_{i}"] = e
        if len(runs) >= 3:
            results["order"] = oracle.convergence_order(runs)
    elif axis == "epsilon":
        for i in range(len(outs) - 1):
            diff = float(np.abs(outs[i][2] - outs[i + 1][2]).max())
            results["sweep_entries"][f"delta_diff_decade_{i}"] = diff
        for i, (_, eps, _, _) in enumerate(outs):
            results["sweep_entries"][f"eps_{i}"] = eps
    else:
        for i, (_, T, q1, extra) in enumerate(outs):
            results["sweep_entries"][f"T_{i}"] = T
            results["sweep_entries"][f"first_ratio_{i}"] = q1
            results["sweep_entries"][f"f0_{i}"] = extra["f0"]
    outdir = out_override or cfg["output"]["directory"]
    results["artifacts"] = write_artifacts(results, outdir)
    return EXIT_OK, results


def run_norms(input_path, gamma, alpha):
    """Norm report of a GridField snapshot, printed to stdout."""
    with open(input_path) as fh:
        gf = linear_pde.GridField.from_text(fh.read())
    f = stefan_linear._sampled_from_field(gf)
    report = hoelder.norm_Cs2gamma(f, gamma, alpha)
    return report.to_text()


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="stefan-pme",
        description="two-phase degenerate free-boundary laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute one scenario")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--scenario", default=None)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--seed", type=int, default=None)
    sweep_p = sub.add_parser("sweep", help="refinement sweep")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--axis", required=True,
                         choices=("grid", "epsilon", "horizon"))
    sweep_p.add_argument("--points", type=int, required=True)
    sweep_p.add_argument("--out", default=None)
    norms_p = sub.add_parser("norms", help="norm report of a snapshot")
    norms_p.add_argument("--input", required=True)
    norms_p.add_argument("--gamma", type=float, required=True)
    norms_p.add_argument("--alpha", type=float, required=True)
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.scenario is not None:
                if args.scenario not in scenarios.SCENARIOS:
                    raise ConfigError(
                        f"unknown scenario.name {args.scenario!r}")
                cfg["scenario"]["name"] = args.scenario
            code, results = run_scenario(cfg, out_override=args.out,
                                         seed=args.seed)
            text, _ = emit_report(results)
            sys.stdout.write(text)
            return code
        if args.command == "sweep":
            cfg = load_config(args.config)
            code, results = run_sweep(cfg, args.axis, args.points,
                                      out_override=args.out)
            text, _ = emit_report(results)
            sys.stdout.write(text)
            return code
        sys.stdout.write(run_norms(args.input, args.gamma, args.alpha))
        return EXIT_OK
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except StefanPmeError as exc:
        sys.stderr.write(f"solver error ({type(exc).__name__}): {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
