import json
import os
import threading
import time
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    return str(value)


class Tracer:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Tracer, cls).__new__(cls)
            default_file = os.path.join(os.path.dirname(__file__), "..", "..", "logs", "traces.jsonl")
            cls._instance.trace_file = os.getenv("TVCBF_TRACE_FILE", default_file)
            cls._instance.enabled = os.getenv("TVCBF_TRACE", "1") != "0"
            cls._instance.current_trace_id = str(uuid.uuid4())
            cls._instance._local = threading.local()
            cls._instance._lock = threading.Lock()
        return cls._instance

    @property
    def span_stack(self) -> List[Dict[str, Any]]:
        # One stack per thread so concurrent runs nest their own spans.
        if not hasattr(self._local, "spans"):
            self._local.spans = []
        return self._local.spans

    def configure(self, trace_file: Optional[str] = None, enabled: Optional[bool] = None):
        if trace_file is not None:
            self.trace_file = trace_file
        if enabled is not None:
            self.enabled = enabled

    def start_trace(self, trace_id: Optional[str] = None):
        self.current_trace_id = trace_id or str(uuid.uuid4())
        self.span_stack.clear()
        self.log_event("trace_start", {"trace_id": self.current_trace_id})

    def start_span(self, name: str, inputs: Optional[Dict[str, Any]] = None) -> str:
        span_id = str(uuid.uuid4())
        span = {
            "span_id": span_id,
            "name": name,
            "start_time": time.perf_counter(),
            "inputs": inputs or {},
        }
        stack = self.span_stack
        stack.append(span)
        self.log_event("span_start", {
            "trace_id": self.current_trace_id,
            "span_id": span_id,
            "parent_span_id": stack[-2]["span_id"] if len(stack) > 1 else None,
            "name": name,
            "inputs": inputs,
        })
        return span_id

    def end_span(self, outputs: Optional[Any] = None, error: Optional[str] = None):
        stack = self.span_stack
        if not stack:
            return

        span = stack.pop()
        duration = time.perf_counter() - span["start_time"]

        self.log_event("span_end", {
            "trace_id": self.current_trace_id,
            "span_id": span["span_id"],
            "name": span["name"],
            "duration_ms": duration * 1000,
            "outputs": outputs,
            "error": error,
        })

    def log_event(self, event_type: str, data: Dict[str, Any]):
        if not self.enabled:
            return
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event": event_type,
            **data,
        }
        line = json.dumps(entry, default=_jsonable)
        with self._lock:
            os.makedirs(os.path.dirname(os.path.abspath(self.trace_file)), exist_ok=True)
            with open(self.trace_file, "a", encoding="utf-8") as f:
                f.write(line + "\n")


# Global accessor
tracer = Tracer()
