"""Independent runs in worker processes, one RNG stream per run."""
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, List, Optional

from utils.tracer import tracer
from .engine import Trace, run
from .scenario import Scenario


def seed_sweep(scenario: Scenario, seeds: Iterable[int]) -> List[Scenario]:
    return [scenario.model_copy(update={"seed": int(seed)}) for seed in seeds]


def run_batch(scenarios: List[Scenario], max_workers: Optional[int] = None) -> List[Trace]:
    """Runs every scenario; results keep the input order."""
    tracer.start_span("run_batch", {"runs": len(scenarios), "max_workers": max_workers})
    if max_workers == 1 or len(scenarios) <= 1:
        traces = [run(s) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            traces = list(pool.map(run, scenarios))
    tracer.end_span(outputs={"runs": len(traces)})
    return traces
