import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cyclicflow.bench.cli import main
from cyclicflow.bench.config import (
    SCHEMA,
    ScenarioConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    dumps_config,
    load_config,
    loads_config,
)
from cyclicflow.bench.report import emit_report, summarize
from cyclicflow.bench.scenarios import (
    ManufacturedFlow,
    RotatingWalls,
    TanhForcing,
    build,
    run_config,
    scenario_annulus,
    scenario_manufactured,
    scenario_square_tanh,
)
from cyclicflow.bench.sweep import SweepSpec, run_sweep, worker_count
from cyclicflow.cycler import averaging_iterate
from cyclicflow.errors import ConfigError, ReportError
from cyclicflow.grid import norm_l2

SMALL = dict(nx=8, ny=8, steps=8)


# ------------------------------------------------------------------ scenarios
def test_tanh_forcing_values():
    f = TanhForcing(2.0, 1.0)
    fx, fy = f(np.array([0.3]), np.array([2.0]), 0.25)
    assert fx[0] == pytest.approx(math.tanh(2.0) / 2.0)
    assert fx[0] == pytest.approx(0.482, abs=1e-3)
    assert fy[0] == 0.0
    assert f(np.array([1.0]), np.array([0.0]), 0.25)[0][0] == 0.0


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1))
def test_tanh_forcing_periodic(x, y, t):
    f = TanhForcing(2.0, 1.0)
    a, b = f(np.array([x]), np.array([y]), t), f(np.array([x]), np.array([y]), t + 1.0)
    assert a[0][0] == pytest.approx(b[0][0], abs=1e-12)


def test_annulus_configuration():
    cfg = scenario_annulus(1.0)
    assert cfg.reynolds == pytest.approx(5.0)
    assert (cfg.period, cfg.steps, cfg.problem) == (1.0, 20, "navier-stokes")
    assert cfg.with_value("Re", 80.0).nu == pytest.approx(5.0 / 80.0)


def test_rotating_walls():
    g = RotatingWalls(0.5, 5.0, 1.0)
    x, y = np.array([5.0, 0.0, 0.5]), np.array([0.0, 5.0, 0.0])
    gx, gy = g(x, y, 0.0)
    assert np.allclose(gx[:2], 0.0) and np.allclose(gy[:2], 0.0)
    assert (gx[2], gy[2]) == (0.5, 0.0)
    gx, gy = g(x, y, 0.25)
    # outer wall rotates with unit angular speed amplitude / (2R) * R = 1/2
    assert np.hypot(gx[0], gy[0]) == pytest.approx(0.5)


def test_annulus_boundary_flux_vanishes():
    cfg = scenario_annulus(1.0, n_r=8, n_th=32)
    scenario, theta = build(cfg)
    for t in np.linspace(0.0, 1.0, 5):
        assert abs(scenario.grid.boundary_flux(scenario.boundary, t)) < 1e-12


def test_manufactured_forcing_consistent():
    flow = ManufacturedFlow(2.0, 0.1, 1.0, False)
    a0, _ = flow.amplitude(0.0)
    assert a0 == 1.0
    x, y = np.array([2.0, -2.0]), np.array([0.3, 1.0])
    # the exact field vanishes on the walls
    assert np.allclose(flow.exact(x, y, 0.3), 0.0)


def test_scenario_constructors():
    assert scenario_square_tanh().scenario == "square-tanh"
    assert scenario_manufactured(problem="navier-stokes").problem == "navier-stokes"


# --------------------------------------------------------------------- config
def test_config_defaults():
    cfg = ScenarioConfig()
    assert (cfg.L, cfg.nu, cfg.period, cfg.steps, cfg.theta) == (2.0, 0.1, 1.0, 20, 0.5)
    assert cfg.tolerance == 1e-8 and cfg.max_cycles == 50
    assert set(SCHEMA) == set(config_to_dict(cfg))


@given(
    st.sampled_from(["square-tanh", "annulus", "manufactured"]),
    st.floats(0.1, 10.0),
    st.floats(1e-3, 1.0),
    st.integers(1, 100),
    st.one_of(st.floats(0.5, 1.0), st.just("shifted")),
)
def test_config_roundtrip(scenario, L, nu, steps, theta):
    cfg = ScenarioConfig(scenario=scenario, L=L, nu=nu, steps=steps, theta=theta)
    again = loads_config(dumps_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_config_hash_resolves_theta():
    a = ScenarioConfig(steps=20, theta="shifted")
    b = ScenarioConfig(steps=20, theta=0.525)
    assert a.resolved_theta == 0.525
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(ScenarioConfig(steps=21, theta="shifted"))


@pytest.mark.parametrize(
    "data",
    [
        {"viscosity": 0.1},
        {"scenario": "cube"},
        {"nu": -1.0},
        {"steps": 0},
        {"steps": 2.5},
        {"theta": 0.3},
        {"theta": "implicit"},
        {"r": 6.0},
        {"method": "newton"},
    ],
)
def test_config_rejects_invalid(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_config_integer_coercion():
    cfg = config_from_dict({"steps": 10.0, "L": 1, "theta": 1})
    assert cfg.steps == 10 and isinstance(cfg.steps, int)
    assert isinstance(cfg.L, float) and cfg.theta == 1.0


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        loads_config("[1, 2]")


# ---------------------------------------------------------------------- sweep
@pytest.mark.parametrize("values", [(1.0, 1.0), (1.0, 2.0, 1.5), (0.0, 1.0), ()])
def test_sweep_values_validated(values):
    with pytest.raises(ConfigError):
        SweepSpec(ScenarioConfig(), "L", values)


def test_sweep_axis_validated():
    with pytest.raises(ConfigError):
        SweepSpec(ScenarioConfig(), "steps", (1.0,))
    with pytest.raises(ConfigError):
        SweepSpec(ScenarioConfig(), "Re", (5.0,))


def test_sweep_rows_ordered_and_deterministic():
    spec = SweepSpec(ScenarioConfig(**SMALL, max_cycles=30), "L", (1.0, 0.5))
    a = run_sweep(spec, workers=1)
    assert [(r.axis_value, r.method) for r in a.rows] == [
        (1.0, "forward"), (1.0, "averaging"), (0.5, "forward"), (0.5, "averaging"),
    ]
    assert all(r.converged and r.error is None for r in a.rows)
    assert a.row(1.0, "averaging").cycles <= a.row(1.0, "forward").cycles
    b = run_sweep(spec, workers=2)
    assert [(r.axis_value, r.method, r.cycles, r.sigma_tail) for r in a.rows] == [
        (r.axis_value, r.method, r.cycles, r.sigma_tail) for r in b.rows
    ]


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("CYCLICFLOW_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("CYCLICFLOW_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CYCLICFLOW_WORKERS", "zero")
    with pytest.raises(ConfigError):
        worker_count()


# --------------------------------------------------------------------- report
@pytest.fixture(scope="module")
def small_runs():
    cfg = ScenarioConfig(**SMALL, max_cycles=3)
    return cfg, run_config(cfg)


def test_emit_report_rejects_empty(tmp_path):
    with pytest.raises(ReportError):
        emit_report({}, tmp_path)
    with pytest.raises(ReportError):
        emit_report({"x": None}, tmp_path, format="svg")


def test_emit_report_csv(tmp_path, small_runs):
    cfg, runs = small_runs
    paths = emit_report({"forward": runs["forward"]}, tmp_path, "csv", cfg)
    lines = (tmp_path / "cycles.csv").read_text().splitlines()
    assert lines[0] == f"# config_sha256={config_hash(cfg)}"
    assert len(lines) == 1 + 1 + 3
    assert json.loads((tmp_path / "config.json").read_text())["nx"] == 8
    assert {p.name for p in paths} == {"cycles.csv", "config.json"}


def test_emit_report_plot_data(tmp_path, small_runs):
    cfg, runs = small_runs
    paths = emit_report(runs, tmp_path, "plot-data", cfg)
    assert sorted(p.name for p in paths) == ["curve_averaging.csv", "curve_forward.csv"]
    lines = (tmp_path / "curve_forward.csv").read_text().splitlines()
    assert lines[:3] == [f"# config_sha256={config_hash(cfg)}", "# curve=forward", "cycle,periodicity_error"]
    assert len(lines) == 6


def test_emit_report_deterministic(tmp_path, small_runs):
    cfg, runs = small_runs
    emit_report(runs, tmp_path / "a", "csv", cfg, timing=False)
    emit_report(runs, tmp_path / "b", "csv", cfg, timing=False)
    assert (tmp_path / "a" / "cycles.csv").read_bytes() == (tmp_path / "b" / "cycles.csv").read_bytes()


def test_summarize(small_runs):
    _, runs = small_runs
    lines = summarize(runs)
    assert len(lines) == 2
    assert "not converged after 3 cycles" in lines[0]


# ------------------------------------------------------------------------ cli
def _write_config(tmp_path, **values):
    path = tmp_path / "cfg.json"
    path.write_text(dumps_config(ScenarioConfig(**values)))
    return path


def test_cli_solve_success(tmp_path, capsys):
    cfg = _write_config(tmp_path, **SMALL)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "out"), "--no-timing"]) == 0
    assert "averaging: converged" in capsys.readouterr().out
    assert (tmp_path / "out" / "cycles.csv").exists()


def test_cli_solve_not_converged(tmp_path):
    cfg = _write_config(tmp_path, **SMALL, max_cycles=2)
    assert main(["solve", "--config", str(cfg), "--method", "forward", "--out", str(tmp_path / "out")]) == 2


def test_cli_config_error(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"nx": 8, "colour": "red"}))
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 3
    assert "colour" in capsys.readouterr().err


def test_cli_rho_table(capsys):
    assert main(["rho", "--table", "--n-list", "4,16"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].startswith("kind,N")
    assert rows[1].startswith("continuous,,,0.2984256075")
    assert rows[2].split(",")[3] == "0.2801388495"
    assert len(rows) == 4


def test_cli_spectrum(tmp_path):
    cfg = _write_config(tmp_path, **SMALL)
    out = tmp_path / "spectrum.csv"
    assert main(["spectrum", "--config", str(cfg), "--modes", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4


def test_cli_sweep(tmp_path, capsys):
    cfg = _write_config(tmp_path, **SMALL)
    code = main(["sweep", "--config", str(cfg), "--axis", "L", "--values", "1,2", "--method", "averaging",
                 "--out", str(tmp_path / "sw"), "--workers", "1"])
    assert code == 0
    assert (tmp_path / "sw" / "sweep_summary.csv").exists()
    assert main(["sweep", "--config", str(cfg), "--axis", "L", "--values", "2,1,3", "--out", str(tmp_path / "x")]) == 3


@pytest.mark.parametrize("problem", ["stokes", "navier-stokes"])
def test_manufactured_periodic_solution_converges(problem):
    errors = []
    for n, steps in ((8, 40), (16, 80)):
        cfg = scenario_manufactured(nx=n, ny=n, steps=steps, problem=problem)
        scenario, theta = build(cfg)
        g = scenario.grid
        result = averaging_iterate(scenario, theta, None, 1e-11, 40, problem)
        assert result.converged
        flow = ManufacturedFlow(cfg.L, cfg.nu, cfg.period, problem == "navier-stokes")
        exact = g.sample(lambda x, y, t: flow.exact(x, y, 0.0), 0.0)
        errors.append(norm_l2(g.unpack(g.pack(result.final_state.velocity) - exact), g))
    assert math.log2(errors[0] / errors[1]) >= 1.9
