"""
Tests for the experiment drivers and the command-line interface
"""

import json

import pandas as pd
import pytest

from aoinf.__main__ import main
from aoinf.config import ExperimentConfig
from aoinf.experiments import (
    cmd_evaluate,
    cmd_init,
    cmd_simulate,
    cmd_solve,
    cmd_sweep,
    cmd_verify,
    resolve_policy,
    run_tasks,
    sweep_point,
)
from aoinf.results import SWEEP_COLUMNS, TRACE_COLUMNS, EVENT_COLUMNS, load_policy


def _divide(a, b):
    return a / b


def test_run_tasks_keeps_order_and_errors():
    """Test that results come back in submission order with exceptions in place"""
    results = run_tasks(_divide, [(6, 3), (1, 0), (9, 3)], workers=1)
    assert results[0] == 2
    assert isinstance(results[1], ZeroDivisionError)
    assert results[2] == 3


def test_run_tasks_process_pool():
    """Test that the process pool gives the same ordered results"""
    tasks = [(float(i), 2.0) for i in range(6)]
    assert run_tasks(_divide, tasks, workers=2) == run_tasks(_divide, tasks, workers=1)


def test_cmd_solve_writes_files(mini_config):
    """Test report.json, policy.csv and values.csv"""
    result = cmd_solve(mini_config)
    out = mini_config.output_dir
    assert result.exit_code == 0
    assert {p.name for p in result.files} == {"policy.csv", "values.csv", "report.json"}

    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["states"] == 140
    assert sum(report["policy_action_counts"].values()) == 140

    policy = pd.read_csv(out / "policy.csv")
    assert list(policy.columns) == ["aoinf", "phase", "cache_full", "cache_age", "action"]
    assert len(policy) == 140
    assert set(policy["action"]) <= {"idle", "compute", "tx", "offload"}
    values = pd.read_csv(out / "values.csv")
    assert list(values.columns)[-1] == "value"


def test_cmd_solve_not_converged(mini_config):
    """Test that an iteration cap still writes files but exits 1"""
    mini_config.solver.max_iterations = 2
    result = cmd_solve(mini_config)
    assert result.exit_code == 1
    assert (mini_config.output_dir / "policy.csv").exists()
    assert result.summary["converged"] is False


def test_solved_policy_round_trip(mini_config):
    """Test that evaluating the saved policy reproduces the solver gain"""
    solved = cmd_solve(mini_config)
    path = mini_config.output_dir / "policy.csv"
    policy, label, report = resolve_policy(mini_config, policy_path=path)
    assert report is None
    assert label == str(path)
    assert policy == load_policy(path, mini_config.model)

    result = cmd_evaluate(mini_config, policy_path=path)
    assert result.exit_code == 0
    assert result.summary["average_aoinf_per_slot"] == pytest.approx(
        solved.summary["gain_per_slot"], abs=1e-6
    )


def test_resolve_policy_exclusive(mini_config, temp_dir):
    """Test that --policy and --baseline cannot be combined"""
    with pytest.raises(ValueError, match="mutually exclusive"):
        resolve_policy(mini_config, temp_dir / "policy.csv", "random")


def test_cmd_evaluate_baseline(mini_config):
    """Test exact evaluation of a baseline"""
    result = cmd_evaluate(mini_config, baseline_name="onboard")
    assert result.exit_code == 0
    data = json.loads((mini_config.output_dir / "evaluation.json").read_text())
    assert data["policy"] == "onboard"
    assert data["start"] == [5, 0, 0, 0]
    assert 1.0 <= data["average_aoinf_per_slot"] <= 5.0
    assert "solver_gain_per_slot" not in data


def test_cmd_evaluate_optimal(mini_config):
    """Test that the default policy is the fresh optimum"""
    result = cmd_evaluate(mini_config)
    assert result.summary["policy"] == "optimal"
    assert result.summary["average_aoinf_per_slot"] == pytest.approx(
        result.summary["solver_gain_per_slot"], abs=1e-6
    )


def test_cmd_simulate(mini_config):
    """Test per-seed traces and the summary"""
    result = cmd_simulate(mini_config, baseline_name="random", seeds=[3, 4])
    out = mini_config.output_dir
    assert result.exit_code == 0
    for seed in (3, 4):
        trace = pd.read_csv(out / f"trace_seed{seed}.csv")
        assert list(trace.columns) == TRACE_COLUMNS
        assert len(trace) == 2000
        events = pd.read_csv(out / f"events_seed{seed}.csv")
        assert list(events.columns) == EVENT_COLUMNS

    summary = json.loads((out / "summary.json").read_text())
    assert [run["seed"] for run in summary["runs"]] == [3, 4]
    assert summary["horizon"] == 2000
    assert all(run["relative_error"] < 0.2 for run in summary["runs"])


def test_cmd_simulate_workers_do_not_change_output(mini_config):
    """Test that a process pool reproduces the serial summary"""
    serial = cmd_simulate(mini_config, baseline_name="offload", seeds=[1, 2])
    mini_config.workers = 2
    parallel = cmd_simulate(mini_config, baseline_name="offload", seeds=[1, 2])
    assert serial.summary == parallel.summary


def test_cmd_sweep(mini_config):
    """Test the sweep table and that the optimum dominates every baseline"""
    result = cmd_sweep(mini_config)
    assert result.exit_code == 0
    table = pd.read_csv(mini_config.output_dir / "sweep.csv")
    assert list(table.columns) == SWEEP_COLUMNS
    assert list(zip(table["p_tx"], table["p_offload"])) == [(0.2, 0.4), (0.8, 0.4)]
    for name in ("random", "onboard", "offload"):
        assert (table["gain_opt"] <= table[f"gain_{name}"] + 1e-9).all()
    assert table["gain_opt"].iloc[1] <= table["gain_opt"].iloc[0] + 1e-9


def test_cmd_sweep_empty_grid(mini_config):
    """Test that an empty grid is a ValueError"""
    mini_config.sweep.p_tx = []
    with pytest.raises(ValueError, match="must not be empty"):
        cmd_sweep(mini_config)


def test_cmd_sweep_reports_non_convergence(mini_config):
    """Test that unconverged grid points are listed and fail the run"""
    mini_config.solver.max_iterations = 2
    result = cmd_sweep(mini_config)
    assert result.exit_code == 1
    assert len(result.summary["failures"]) == 2
    assert len(result.summary["rows"]) == 2


def test_cmd_verify(mini_config):
    """Test verify.json and the exit code"""
    result = cmd_verify(mini_config)
    assert result.exit_code == 0, result.text
    data = json.loads((mini_config.output_dir / "verify.json").read_text())
    assert data["passed"] is True
    assert len(data["checks"]) == 8


def test_cmd_verify_fault_injection(mini_config):
    """Test that fault injection turns verify red"""
    mini_config.fault_injection = True
    result = cmd_verify(mini_config)
    assert result.exit_code == 1
    assert result.summary["checks"]["ratio-form-residual"]["passed"] is False


def test_cmd_init(temp_dir):
    """Test default config generation and refusal to overwrite"""
    path = temp_dir / "aoinf.yaml"
    assert cmd_init(path).exit_code == 0
    assert ExperimentConfig.from_file(path).model.aoinf_cap == 40
    assert cmd_init(path).exit_code == 1


def test_csv_only_output(mini_config):
    """Test that output-formats restricts the files written"""
    mini_config.output_formats = ["csv"]
    result = cmd_solve(mini_config)
    assert {p.name for p in result.files} == {"policy.csv", "values.csv"}
    assert not (mini_config.output_dir / "report.json").exists()


@pytest.fixture
def mini_config_file(mini_config, temp_dir):
    path = temp_dir / "aoinf.yaml"
    mini_config.save(path)
    return path


def test_main_solve(mini_config_file, temp_dir, capsys):
    """Test `aoinf solve` through main()"""
    out = temp_dir / "cli"
    with pytest.raises(SystemExit) as exc_info:
        main(["solve", "-c", str(mini_config_file), "--out", str(out)])
    assert exc_info.value.code == 0
    assert (out / "policy.csv").exists()
    assert "Wrote" in capsys.readouterr().out


def test_main_set_override(mini_config_file, temp_dir):
    """Test that --set reaches the experiment"""
    out = temp_dir / "cli"
    with pytest.raises(SystemExit) as exc_info:
        main(
            [
                "evaluate",
                "-c",
                str(mini_config_file),
                "--out",
                str(out),
                "--baseline",
                "offload",
                "--set",
                "model.p-offload=1.0",
            ]
        )
    assert exc_info.value.code == 0
    data = json.loads((out / "evaluation.json").read_text())
    assert data["model"]["p_offload"] == 1.0
    assert data["average_aoinf_per_slot"] == pytest.approx(3.5)


def test_main_bad_config(temp_dir, capsys, monkeypatch):
    """Test that an invalid override exits 1 with a message"""
    monkeypatch.chdir(temp_dir)
    with pytest.raises(SystemExit) as exc_info:
        main(["solve", "--out", str(temp_dir), "--set", "model.window=99"])
    assert exc_info.value.code == 1
    assert "window (99) must not exceed period (30)" in capsys.readouterr().err


def test_main_missing_config(temp_dir, capsys):
    """Test that an explicit missing config exits 1"""
    with pytest.raises(SystemExit) as exc_info:
        main(["solve", "-c", str(temp_dir / "nope.yaml")])
    assert exc_info.value.code == 1
    assert "Config file not found" in capsys.readouterr().err


def test_main_policy_and_baseline_exclusive(temp_dir):
    """Test that argparse rejects --policy with --baseline"""
    with pytest.raises(SystemExit) as exc_info:
        main(["evaluate", "--policy", str(temp_dir / "p.csv"), "--baseline", "random"])
    assert exc_info.value.code == 2


def test_main_list_checks(capsys):
    """Test `aoinf verify --list-checks`"""
    with pytest.raises(SystemExit) as exc_info:
        main(["verify", "--list-checks"])
    assert exc_info.value.code == 0
    output = capsys.readouterr().out
    assert "theta-invariance" in output
    assert "improvement-certificate" in output


def test_main_init(temp_dir, capsys):
    """Test `aoinf init PATH`"""
    path = temp_dir / "custom.yaml"
    with pytest.raises(SystemExit) as exc_info:
        main(["init", str(path)])
    assert exc_info.value.code == 0
    assert path.exists()
    assert "Created default config" in capsys.readouterr().out


def test_main_bad_policy_file(mini_config_file, temp_dir, capsys):
    """Test that a malformed policy file exits 1"""
    bad = temp_dir / "policy.csv"
    bad.write_text("aoinf,phase\n1,0\n")
    with pytest.raises(SystemExit) as exc_info:
        main(["evaluate", "-c", str(mini_config_file), "--policy", str(bad)])
    assert exc_info.value.code == 1
    assert "lacks column(s): cache_full, cache_age, action" in capsys.readouterr().err


@pytest.mark.slow
def test_default_grid_dominance_and_offload_trend():
    """Test dominance in all 16 cells and offload-only improving in p_offload"""
    config = ExperimentConfig.default()
    cfg = config.solve_config()
    rows = {
        point: sweep_point(config.model.replace(p_tx=point[0], p_offload=point[1]), cfg, None)
        for point in config.sweep.points
    }
    assert len(rows) == 16

    for row in rows.values():
        assert row["converged"]
        for name in ("random", "onboard", "offload"):
            assert row["gain_opt"] <= row[f"gain_{name}"] + 1e-9

    for p_tx in config.sweep.p_tx:
        offload = [rows[(p_tx, p_offload)]["gain_offload"] for p_offload in config.sweep.p_offload]
        assert all(b < a for a, b in zip(offload, offload[1:]))
