import pytest
import sys
import os
from unittest.mock import patch

import numpy as np
import pandas as pd

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))

from cli import main
from geometry.scaling import ScalingSolution, ScalingStatus
from sim import get_scenario
from sim.persistence import read_trace, save_scenario


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "moving_circles" in out and "planar_arm_box" in out
    assert main(["list"], registry={}) == 0


def test_usage_errors():
    assert main(["fly"]) == 1
    assert main([]) == 1
    assert main(["run"]) == 1
    assert main(["run", "--scenario", "moving_circles", "--time-varying", "maybe"]) == 1


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "circles"
    code = main(["run", "--scenario", "moving_circles", "--duration", "3", "--out", str(out)])
    assert code == 0
    assert os.path.exists(out / "trace.csv")
    assert os.path.exists(out / "metrics.json")
    for name in ("h_vs_time", "paths", "min_distance"):
        assert os.path.exists(out / "series" / f"{name}.csv")
    assert len(read_trace(str(out / "trace.csv")).records) == 300


def test_output_root_from_environment(tmp_path):
    with patch.dict(os.environ, {"TVCBF_OUTPUT_ROOT": str(tmp_path)}):
        assert main(["run", "--scenario", "moving_circles", "--duration", "0.1"]) == 0
    assert os.path.exists(tmp_path / "moving_circles" / "trace.csv")


def test_unsafe_run_exit_code(tmp_path):
    args = ["run", "--scenario", "moving_circles", "--duration", "4", "--time-varying", "off", "--out", str(tmp_path)]
    assert main(args) == 2


def test_invalid_overrides(tmp_path):
    assert main(["run", "--scenario", "moving_circles", "--beta", "0.5", "--out", str(tmp_path)]) == 1
    assert main(["run", "--scenario", "moving_circles", "--dt", "-0.1", "--out", str(tmp_path)]) == 1
    assert main(["run", "--scenario", "no_such_scenario", "--out", str(tmp_path)]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_run_from_config_file(tmp_path):
    path = tmp_path / "arm.json"
    save_scenario(get_scenario("planar_arm_box"), str(path))
    out = tmp_path / "arm"
    assert main(["run", "--config", str(path), "--duration", "0.2", "--out", str(out)]) == 0
    trace = read_trace(str(out / "trace.csv"))
    assert trace.scenario.name == "planar_arm_box"
    assert trace.scenario.duration == 0.2


def test_zero_duration_run(tmp_path):
    assert main(["run", "--scenario", "moving_circles", "--duration", "0", "--out", str(tmp_path)]) == 0
    assert read_trace(str(tmp_path / "trace.csv")).records == []


def test_compare_single_controller(tmp_path):
    args = ["compare", "--scenario", "moving_circles", "--duration", "1", "--controllers", "tvcbfqp", "--out", str(tmp_path)]
    assert main(args) == 0
    table = pd.read_csv(tmp_path / "compare.csv")
    assert list(table["controller"]) == ["tvcbfqp"]
    assert bool(table["safe"].iloc[0])
    assert os.path.exists(tmp_path / "tvcbfqp" / "metrics.json")


def test_compare_rejects_mpc_without_target(tmp_path):
    args = ["compare", "--scenario", "moving_circles", "--duration", "1", "--out", str(tmp_path)]
    assert main(args) == 1


def test_scaling_breakdown_exits_as_solver_failure(tmp_path):
    unsolved = ScalingSolution(alpha_star=float("nan"), p_star=np.full(3, np.nan), status=ScalingStatus.MAX_ITER)
    with patch("sim.engine.min_scaling", return_value=unsolved):
        assert main(["run", "--scenario", "moving_rectangle", "--duration", "0.1", "--out", str(tmp_path)]) == 3


def test_rectangle_start_runs(tmp_path):
    assert main(["run", "--scenario", "moving_rectangle", "--duration", "0.1", "--out", str(tmp_path)]) == 0
