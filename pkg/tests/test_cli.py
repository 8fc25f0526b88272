"""Command line front end: config handling, runs, sweeps, reports."""

import os

import numpy as np
import pytest

from stefan_pme import cli, hoelder, linear_pde, scenarios
from stefan_pme.errors import ConfigError


EQ_CONFIG = """\
[scenario]
name = equilibrium

[params]
m = 2
gamma = 0.2
k = 1

[grid]
n_lam = 50
n_t = 11
T = 0.1
"""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_default_config_round_trips():
    text = cli.default_config("equilibrium")
    cfg = cli.parse_config(text)
    again = cli.parse_config(cli.serialize_config(cfg))
    assert again == cfg


def test_parse_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        cli.parse_config(EQ_CONFIG + "\n[mystery]\nx = 1\n")


def test_parse_rejects_unknown_key_by_path():
    with pytest.raises(ConfigError, match=r"solver\.bogus"):
        cli.parse_config(EQ_CONFIG + "\n[solver]\nbogus = 1\n")


def test_parse_names_missing_required_key():
    text = EQ_CONFIG.replace("k = 1\n", "")
    with pytest.raises(ConfigError, match=r"params\.k"):
        cli.parse_config(text)


def test_parse_rejects_bad_value():
    with pytest.raises(ConfigError, match=r"params\.m"):
        cli.parse_config(EQ_CONFIG.replace("m = 2", "m = two"))


def test_parse_validates_grid_scenario_mode_params():
    with pytest.raises(ConfigError, match="n_lam"):
        cli.parse_config(EQ_CONFIG.replace("n_lam = 50", "n_lam = 3"))
    with pytest.raises(ConfigError, match="scenario.name"):
        cli.parse_config(EQ_CONFIG.replace("name = equilibrium",
                                           "name = warp_drive"))
    with pytest.raises(ConfigError, match="solver.mode"):
        cli.parse_config(EQ_CONFIG + "\n[solver]\nmode = sideways\n")
    with pytest.raises(ConfigError, match="params block invalid"):
        cli.parse_config(EQ_CONFIG.replace("m = 2", "m = 0.5"))


def test_main_missing_config_file(tmp_path):
    code = cli.main(["run", "--config", str(tmp_path / "nope.ini")])
    assert code == cli.EXIT_CONFIG


# ---------------------------------------------------------------------------
# scenario runs
# ---------------------------------------------------------------------------

def test_run_equilibrium_writes_artifacts(tmp_path):
    cfg = cli.parse_config(EQ_CONFIG)
    code, results = cli.run_scenario(cfg, out_override=str(tmp_path / "out"))
    assert code == cli.EXIT_OK
    assert results["metrics"]["front_drift"] < 1e-6
    for name in ("front.csv", "report.txt", "report.csv",
                 "iterations.csv", "v_plus.txt"):
        assert os.path.exists(tmp_path / "out" / name)
    head = (tmp_path / "out" / "front.csv").read_text().splitlines()[0]
    assert head == "t,rho_0,sup,inf"
    head_it = (tmp_path / "out" /
               "iterations.csv").read_text().splitlines()[0]
    assert head_it == "iter,update,q,rhs_sup,cross_check"


def test_run_is_deterministic(tmp_path):
    cfg = cli.parse_config(EQ_CONFIG)
    cli.run_scenario(cfg, out_override=str(tmp_path / "a"))
    cli.run_scenario(cfg, out_override=str(tmp_path / "b"))
    for name in ("front.csv", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_run_check_failure_exit_code(tmp_path):
    text = """\
[scenario]
name = traveling_wave

[params]
m = 2
gamma = 0.2
k = 1

[grid]
n_lam = 50
n_t = 26
T = 0.25

[solver]
mode = marching
check_tolerance = 1e-6
"""
    cfg = cli.parse_config(text)
    code, results = cli.run_scenario(cfg, out_override=str(tmp_path / "out"))
    assert code == cli.EXIT_CHECK
    assert results["check"][1] is False
    report = (tmp_path / "out" / "report.txt").read_text()
    assert "FAIL" in report


def test_emit_report_flags_trivial_runs():
    text, csv_text = cli.emit_report(
        {"metrics": {}, "norm_entries": {"ratio_0": 0.0}, "trivial": True})
    assert "trivial run: all norm entries are zero" in text
    assert "trivial_run,1" in csv_text


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_sweep_grid_refines_and_reports(tmp_path):
    text = """\
[scenario]
name = traveling_wave

[params]
m = 2
gamma = 0.2
k = 1

[grid]
n_lam = 50
n_t = 26
T = 0.25

[solver]
mode = marching
"""
    cfg = cli.parse_config(text)
    code, results = cli.run_sweep(cfg, "grid", 2,
                                  out_override=str(tmp_path / "out"))
    assert code == cli.EXIT_OK
    ent = results["sweep_entries"]
    assert set(ent) == {"h_0", "h_1", "error_0", "error_1"}
    assert ent["h_1"] < ent["h_0"]
    assert ent["error_1"] < ent["error_0"]


def test_sweep_requires_two_points():
    cfg = cli.parse_config(EQ_CONFIG)
    with pytest.raises(ConfigError):
        cli.run_sweep(cfg, "grid", 1)


def test_sweep_epsilon_reports_decade_differences(tmp_path):
    text = """\
[scenario]
name = linear_stefan_mms

[params]
m = 2
gamma = 0.2
k = 1
eps = 1e-2

[grid]
n_lam = 15
n_omega = 8
n_t = 7
T = 0.02
"""
    cfg = cli.parse_config(text)
    code, results = cli.run_sweep(cfg, "epsilon", 2,
                                  out_override=str(tmp_path / "out"))
    assert code == cli.EXIT_OK
    ent = results["sweep_entries"]
    assert ent["eps_0"] == pytest.approx(1e-2)
    assert ent["eps_1"] == pytest.approx(1e-3)
    assert np.isfinite(ent["delta_diff_decade_0"])
    assert ent["delta_diff_decade_0"] > 0.0


def test_sweep_horizon_reports_ratio_and_source_size(tmp_path):
    cfg = cli.parse_config(EQ_CONFIG)
    code, results = cli.run_sweep(cfg, "horizon", 2,
                                  out_override=str(tmp_path / "out"))
    assert code == cli.EXIT_OK
    ent = results["sweep_entries"]
    for key in ("T_0", "T_1", "first_ratio_0", "first_ratio_1",
                "f0_0", "f0_1"):
        assert key in ent
    assert ent["T_1"] == pytest.approx(ent["T_0"] / 2.0)


# ---------------------------------------------------------------------------
# norms subcommand
# ---------------------------------------------------------------------------

def test_norms_output_parses_as_report(tmp_path):
    import stefan_pme.geometry as geometry

    geom = geometry.ReferenceGeometry(kind="segment1d", gamma0=0.4)
    grid = geom.phase_grid("+", 9)
    times = np.linspace(0.0, 0.5, 5)
    vals = grid.lam[:, None, None] * times[None, None, :]
    gf = linear_pde.GridField(grid=grid, times=times, values=vals)
    snap = tmp_path / "field.txt"
    snap.write_text(gf.to_text())
    out = cli.run_norms(str(snap), 0.2, 0.5)
    rep = hoelder.NormReport.from_text(out)
    assert rep.sup_norm == pytest.approx(0.5)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("STEFAN_PME_THREADS", "4")
    assert cli.worker_count(2) == 2
    assert cli.worker_count(8) == 4
    monkeypatch.setenv("STEFAN_PME_THREADS", "junk")
    assert cli.worker_count(8) == 1
