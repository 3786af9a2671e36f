import pytest
import sys
import os
import json

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))

from geometry.primitives import Pose
from utils.tracer import tracer


@pytest.fixture
def trace_file(tmp_path):
    original = (tracer.trace_file, tracer.enabled)
    path = tmp_path / "traces.jsonl"
    tracer.configure(trace_file=str(path), enabled=True)
    yield path
    tracer.configure(trace_file=original[0], enabled=original[1])


def _events(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def test_nested_spans(trace_file):
    tracer.start_trace("trace-1")
    outer = tracer.start_span("outer", {"n": 1})
    inner = tracer.start_span("inner")
    tracer.end_span(outputs={"ok": True})
    tracer.end_span(error="boom")

    events = _events(trace_file)
    assert [e["event"] for e in events] == ["trace_start", "span_start", "span_start", "span_end", "span_end"]
    assert events[1]["parent_span_id"] is None
    assert events[2]["parent_span_id"] == outer
    assert events[3]["span_id"] == inner and events[3]["outputs"] == {"ok": True}
    assert events[4]["error"] == "boom"
    assert all(e.get("trace_id") == "trace-1" for e in events)


def test_end_without_span_is_ignored(trace_file):
    tracer.start_trace()
    tracer.end_span()
    assert len(_events(trace_file)) == 1


def test_disabled_tracer_writes_nothing(trace_file):
    tracer.configure(enabled=False)
    tracer.log_event("anything", {"x": 1})
    assert not os.path.exists(trace_file)


def test_numpy_and_models_serialize(trace_file):
    tracer.log_event("payload", {
        "array": np.array([1.0, 2.0]),
        "scalar": np.float64(0.5),
        "pose": Pose(position=(1.0, 2.0, 3.0)),
    })
    event = _events(trace_file)[0]
    assert event["array"] == [1.0, 2.0]
    assert event["scalar"] == 0.5
    assert event["pose"]["position"] == [1.0, 2.0, 3.0]
