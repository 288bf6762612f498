import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from levelcross import ConfigError, ExperimentConfig, lz_check, run_single, run_sweep
from levelcross.cli import main
from levelcross.harness import (
    SWEEP_COLUMNS,
    emit_figure_data,
    figure_config,
    fmt,
    run_eta_scan,
)

FIG1 = {
    "schedule": {
        "delta": {"kind": "linear", "kappa": 0.025},
        "omega": {"kind": "exp_gap", "omega0": 1.0, "sigma": 2.0},
        "t_start": -2000.0,
        "t_end": 2000.0,
        "crossings": [0.0],
    },
    "initial_state": "down",
    "tol": 1e-8,
    "n_samples": 101,
}

FIG3 = {
    "schedule": {
        "delta": {"kind": "linear", "kappa": math.sqrt(5.0)},
        "omega": {"kind": "t_sine", "lam": 1.0, "beta": 1.0, "T": math.sqrt(200.0)},
        "t_start": -math.sqrt(200.0),
        "t_end": math.sqrt(200.0),
        "crossings": [0.0],
    },
    "n_samples": 101,
}

ZERO = {
    "schedule": {
        "delta": {"kind": "constant", "c": 0.0},
        "omega": {"kind": "constant", "c": 0.0},
        "t_start": -1.0,
        "t_end": 1.0,
        "crossings": [0.0],
    },
    "n_samples": 5,
}


def with_sweep(base, parameter, values):
    d = json.loads(json.dumps(base))
    d["sweep"] = {"parameter": parameter, "values": values}
    return d


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---- formatting


def test_fmt():
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(1e-20) == "1e-20"
    assert fmt(0.0) == "0" and fmt(-0.0) == "0"
    assert fmt(math.nan) == "nan" and fmt(-math.inf) == "-inf"
    assert fmt(2000) == "2000"


# ---- config parsing


def test_config_defaults_and_round_trip():
    cfg = ExperimentConfig.from_dict(FIG1)
    assert cfg.tol == 1e-8 and cfg.n_samples == 101
    assert cfg.exclusion == pytest.approx(80.0)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("patch,field", [
    ({"tol": 0.5}, "tol"),
    ({"n_samples": 1}, "n_samples"),
    ({"initial_state": "sideways"}, "initial_state"),
    ({"initial_state": {"c_down": [1, 0], "c_up": [1, 0]}}, "initial_state"),
    ({"eta_exclusion": -1}, "eta_exclusion"),
    ({"colour": "blue"}, "colour"),
    ({"sweep": {"parameter": "schedule.omega.width", "values": [1]}}, "sweep.parameter"),
    ({"sweep": {"parameter": "schedule.omega.kind", "values": [1]}}, "sweep.parameter"),
    ({"sweep": {"parameter": "schedule.omega.sigma", "values": []}}, "sweep.values"),
])
def test_config_errors_name_field(patch, field):
    d = dict(FIG1, **patch)
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(d)
    assert e.value.field == field


def test_schedule_errors_name_nested_field():
    d = json.loads(json.dumps(FIG1))
    d["schedule"]["omega"]["sigma"] = "wide"
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(d)
    assert e.value.field == "schedule.omega.sigma"


def test_explicit_initial_state():
    d = dict(FIG1, initial_state={"c_down": [0.6, 0.0], "c_up": [0.0, 0.8]})
    cfg = ExperimentConfig.from_dict(d)
    assert cfg.initial_state.c_up == 0.8j


def test_with_value_substitutes_path():
    cfg = ExperimentConfig.from_dict(FIG1)
    assert cfg.with_value("schedule.omega.sigma", 3.5).schedule.omega.sigma == 3.5
    assert cfg.with_value("schedule.crossings.0", 0.0).schedule.crossings == (0.0,)


# ---- single runs


def test_run_single_fig1(tmp_path):
    res = run_single(ExperimentConfig.from_dict(FIG1), tmp_path)
    assert abs(res.trajectory.p_up_final - 0.99751) <= 0.02
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["crossings"][0]["predicted_survival"] == pytest.approx(0.997506234414)
    assert report["degenerate"] is False
    assert report["max_eta_outside_crossing"] < 0.05
    assert len(read_csv(tmp_path / "trajectory.csv")) == 102


def test_run_single_fig3():
    res = run_single(ExperimentConfig.from_dict(FIG3))
    assert res.trajectory.p_up_final <= 0.05
    assert res.report.predicted_survival == 0.0


def test_run_single_zero_hamiltonian_is_flagged(tmp_path):
    res = run_single(ExperimentConfig.from_dict(ZERO), tmp_path)
    pops = res.trajectory.populations_bare
    assert np.all(pops == pops[0])
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["degenerate"] is True
    assert report["crossings"] == []


# ---- sweeps


def test_sweep_rows_sorted_and_predicted():
    cfg = ExperimentConfig.from_dict(with_sweep(FIG1, "schedule.omega.sigma", [4.0, 0.4, 2.0]))
    rows = run_sweep(cfg)
    assert [r.param_value for r in rows] == [0.4, 2.0, 4.0]
    for r in rows:
        assert r.predicted_survival == pytest.approx(math.cos(math.atan(0.025 * r.param_value)) ** 2)
        assert abs(r.p_up_final + r.p_down_final - 1) <= 1e-9
        assert r.abs_error == pytest.approx(abs(r.p_up_final - r.predicted_survival))
        assert r.error == ""


def test_sweep_failure_is_recorded_in_row(tmp_path):
    cfg = ExperimentConfig.from_dict(with_sweep(FIG1, "schedule.omega.sigma", [-1.0, 2.0]))
    rows = run_sweep(cfg, out_dir=tmp_path)
    assert rows[0].error and math.isnan(rows[0].p_up_final)
    assert rows[1].error == ""
    table = read_csv(tmp_path / "sweep.csv")
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert table[1][1] == "nan" and "sigma" in table[1][-1]


def test_single_value_sweep_equals_run_single():
    cfg = ExperimentConfig.from_dict(with_sweep(FIG3, "schedule.omega.lam", [1.0]))
    (row,) = run_sweep(cfg)
    single = run_single(ExperimentConfig.from_dict(FIG3))
    assert row.p_up_final == single.trajectory.p_up_final
    assert row.max_eta_outside_crossing == single.max_eta_outside_crossing


def test_sweep_worker_count_does_not_change_output(tmp_path):
    cfg = ExperimentConfig.from_dict(
        with_sweep(FIG3, "schedule.omega.lam", [0.3, 2.0, 1.0, 0.05, 3.0]))
    run_sweep(cfg, workers=1, out_dir=tmp_path / "one")
    run_sweep(cfg, workers=3, out_dir=tmp_path / "three")
    assert (tmp_path / "one" / "sweep.csv").read_bytes() == (tmp_path / "three" / "sweep.csv").read_bytes()


# ---- LZSM check


def test_lz_check_without_coupling_is_exact():
    (row,) = lz_check([0.0])
    assert row.numeric == 1.0 and row.analytic == 1.0 and row.error == 0.0


def test_lz_check_default_parameters(warm_jit, tmp_path):
    rows = lz_check(out_dir=tmp_path)
    assert [r.parameter for r in rows] == [1.0, 2.0, 4.0]
    assert rows[0].analytic == pytest.approx(0.2079, abs=1e-4)
    assert all(r.error <= 1e-3 for r in rows)
    assert read_csv(tmp_path / "lz_check.csv")[0] == ["parameter", "numeric", "analytic", "error"]


@pytest.mark.slow
def test_lz_check_fig1_ratio():
    (row,) = lz_check([40.0])
    assert row.analytic < 1e-27
    assert row.numeric <= 1e-6


def test_lz_check_rejects_short_window():
    with pytest.raises(ValueError):
        lz_check([1.0], window_factor=5)


# ---- figure data


def test_figure1_frame_b_reference_coupling(tmp_path):
    data = emit_figure_data(1, tmp_path, values=[1.0])
    b = read_csv(tmp_path / "fig1_b.csv")
    assert b[0] == ["t", "delta", "omega", "t_raw", "delta_raw", "omega_raw"]
    t_raw = np.array([float(r[3]) for r in b[1:]])
    omega_raw = np.array([float(r[5]) for r in b[1:]])
    assert np.allclose(omega_raw, 1.0 * (1 - np.exp(-np.abs(t_raw) * 1.0 / 2)), rtol=1e-11, atol=1e-12)
    # figure units: time in 2/Omega0, amplitude in Omega0/2
    assert np.allclose(data.frame_b[:, 0], t_raw / 2)
    assert np.allclose(data.frame_b[:, 2], omega_raw * 2)
    a = read_csv(tmp_path / "fig1_a.csv")
    assert a[0][:2] == ["sigma", "sigma_raw"]
    assert float(a[1][0]) == 1.0 and float(a[1][1]) == 2.0


def test_figure3_prediction_identically_zero(tmp_path):
    emit_figure_data(3, tmp_path, values=[0.05, 1.0, 2.0, 3.0])
    a = read_csv(tmp_path / "fig3_a.csv")
    col = a[0].index("predicted_survival")
    assert all(float(r[col]) == 0.0 for r in a[1:])


def test_figure2_prediction_at_lambda_one():
    cfg = figure_config(2, values=[1.0])
    (row,) = run_sweep(cfg)
    expected = math.cos(math.atan(5 / math.pi)) ** 2
    assert row.predicted_survival == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(math.pi**2 / (math.pi**2 + 25), abs=1e-15)


def test_figure_defaults():
    assert figure_config(1).sweep.values[0] == pytest.approx(0.1)
    assert figure_config(1).sweep.values[-1] == pytest.approx(8.0)
    assert len(figure_config(2).sweep.values) == 40
    with pytest.raises(ConfigError):
        figure_config(4)


def test_eta_scan_output(tmp_path):
    scan = run_eta_scan(ExperimentConfig.from_dict(FIG1), tmp_path)
    summary = json.loads((tmp_path / "eta_scan.json").read_text())
    assert summary["max_eta_outside_crossing"] == pytest.approx(scan.max_outside, rel=1e-11)
    assert read_csv(tmp_path / "eta_scan.csv")[0] == ["t", "eta"]


# ---- CLI


def write_config(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_cli_run_and_reproducibility(tmp_path, capsys):
    cfg = write_config(tmp_path, FIG3)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "p_up_final=" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = json.loads(json.dumps(FIG1))
    bad["schedule"]["omega"]["kind"] = "lorentzian"
    cfg = write_config(tmp_path, bad)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "schedule.omega.kind" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["sweep", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--tol", "1"]) == 2


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, FIG1)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--tol", "1e-15"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_cli_sweep_eta_scan_and_lz(tmp_path):
    cfg = write_config(tmp_path, with_sweep(FIG3, "schedule.omega.lam", [1.0, 2.0]))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path), "--workers", "2"]) == 0
    assert len(read_csv(tmp_path / "sweep.csv")) == 3
    assert main(["eta-scan", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lz = write_config(tmp_path, {"parameters": [0.0, 1.0], "window_factor": 100}, "lz.json")
    assert main(["lz-check", "--config", str(lz), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "lz_check.csv")
    assert rows[1][1] == "1"


def test_cli_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "levelcross", "figure", "--id", "3", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "fig3_a.csv").exists() and (tmp_path / "fig3_b.csv").exists()
