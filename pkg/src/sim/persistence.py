"""Scenario configs (JSON), traces (CSV with a scenario header line) and figure series."""
import io
import json
import os
from typing import Dict

import numpy as np
import pandas as pd

from utils.errors import ParameterError
from utils.tracer import tracer
from .engine import TickRecord, Trace
from .metrics import RunSummary
from .robots import build_robot
from .scenario import Scenario

FLOAT_FORMAT = "%.9g"
HEADER_PREFIX = "# scenario="


def save_scenario(scenario: Scenario, path: str):
    tracer.start_span("save_scenario", {"path": path})
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(scenario.model_dump_json(indent=2))
    tracer.end_span(outputs="Scenario saved")


def load_scenario(path: str) -> Scenario:
    tracer.start_span("load_scenario", {"path": path})
    if not os.path.exists(path):
        tracer.end_span(error="File not found")
        raise ParameterError(f"Scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        scenario = Scenario.model_validate_json(f.read())
    tracer.end_span(outputs={"scenario": scenario.name})
    return scenario


def write_trace(trace: Trace, path: str):
    """First line: ``# scenario=<json>``; then the per-tick table of :meth:`Trace.to_frame`."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(HEADER_PREFIX + trace.scenario.model_dump_json() + "\n")
        trace.to_frame().to_csv(f, index=False, float_format=FLOAT_FORMAT)


def read_trace(path: str) -> Trace:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if not header.startswith(HEADER_PREFIX):
            raise ParameterError(f"{path} is not a trace file (missing scenario header)")
        scenario = Scenario.model_validate_json(header[len(HEADER_PREFIX):])
        frame = pd.read_csv(io.StringIO(f.read()))

    trace = Trace(scenario=scenario)
    cols = frame.columns

    def group(prefix: str):
        return [c for c in cols if c.startswith(prefix)]

    x_cols, u_cols, ref_cols = group("x_"), group("u_"), group("uref_")
    h_cols, a_cols, d_cols = group("h_"), group("alpha_"), group("dist_")
    for row in frame.itertuples(index=False):
        values = row._asdict()
        trace.records.append(TickRecord(
            t=values["t"],
            state=[values[c] for c in x_cols],
            u=[values[c] for c in u_cols],
            u_ref=[values[c] for c in ref_cols],
            h=[values[c] for c in h_cols],
            alpha=[values[c] for c in a_cols],
            distance=[values[c] for c in d_cols],
            status=values["status"],
            solve_time=values["solve_time"],
            step_time=values["step_time"],
            fallback=bool(values["fallback"]),
            pruned=int(values["pruned"]),
        ))
    return trace


def _significant(value):
    if isinstance(value, float):
        return float(FLOAT_FORMAT % value)
    if isinstance(value, (list, tuple)):
        return [_significant(v) for v in value]
    if isinstance(value, dict):
        return {k: _significant(v) for k, v in value.items()}
    return value


def write_summary(summary: RunSummary, path: str):
    data = summary.model_dump()
    data["safe"] = summary.safe
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_significant(data), f, indent=2)


def figure_series(trace: Trace) -> Dict[str, pd.DataFrame]:
    """Tables behind the CBF-value, path and minimum-distance plots."""
    frame = trace.to_frame()
    robot = build_robot(trace.scenario.robot)
    positions = np.array([robot.position(np.asarray(r.state)) for r in trace.records]).reshape(len(trace.records), -1)
    dims = positions.shape[1] if positions.size else 0

    paths = pd.DataFrame({"t": frame["t"]})
    for i, axis in enumerate("xyz"[:dims]):
        paths[f"robot_{axis}"] = positions[:, i]
    for j, script in enumerate(trace.scenario.obstacles):
        poses = np.array([script.pose_at(t).r for t in frame["t"]]).reshape(len(frame), 3)
        for i, axis in enumerate("xyz"[:max(dims, 2)]):
            paths[f"{script.name}_{j}_{axis}"] = poses[:, i]

    dist_cols = [c for c in frame.columns if c.startswith("dist_")]
    minimum = pd.DataFrame({"t": frame["t"]})
    minimum["min_distance"] = frame[dist_cols].min(axis=1) if dist_cols else np.inf
    for c in dist_cols:
        minimum[c] = frame[c]

    return {
        "h_vs_time": frame[["t"] + [c for c in frame.columns if c.startswith("h_")]],
        "paths": paths,
        "min_distance": minimum,
    }


def write_series(trace: Trace, out_dir: str):
    series_dir = os.path.join(out_dir, "series")
    os.makedirs(series_dir, exist_ok=True)
    for name, table in figure_series(trace).items():
        table.to_csv(os.path.join(series_dir, f"{name}.csv"), index=False, float_format=FLOAT_FORMAT)
