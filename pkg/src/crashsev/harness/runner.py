"""Execute many configs, one task per view, optionally across worker processes."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .config import ExperimentConfig, Settings
from .pipeline import ExperimentData, ExperimentResult, PipelineCache, StageError, execute

log = logging.getLogger("crashsev")


@dataclass
class MatrixResult:
    configs: list[ExperimentConfig]
    results: list[ExperimentResult]
    skipped: list[ExperimentConfig]
    failures: list[tuple[ExperimentConfig, str]] = field(default_factory=list)
    wall_seconds: float = 0.0
    # view_id -> seconds spent on that view's task, in submission order
    task_seconds: dict[str, float] = field(default_factory=dict)

    def result_for(self, config_id: str) -> ExperimentResult | None:
        for r in self.results:
            if r.config.config_id == config_id:
                return r
        return None


_WORKER: dict = {}


def _init_worker(data: ExperimentData, settings: Settings) -> None:
    _WORKER["data"] = data
    _WORKER["settings"] = settings


def _run_view(configs: list[ExperimentConfig], data=None, settings=None):
    data = data if data is not None else _WORKER["data"]
    settings = settings if settings is not None else _WORKER["settings"]
    cache = PipelineCache()
    out = []
    start = time.perf_counter()
    for cfg in configs:
        try:
            out.append(("ok", cfg, execute(cfg, data, settings, cache)))
        except StageError as exc:
            out.append(("failed", cfg, str(exc)))
    return out, time.perf_counter() - start


def simulate_schedule(task_seconds, workers: int) -> float:
    """Makespan of handing tasks, in order, to whichever worker frees up first.

    This is the policy of the process pool in :func:`run_matrix`, so
    per-task times measured on one core project the wall time on ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    free = [0.0] * workers
    for t in task_seconds:
        i = free.index(min(free))
        free[i] += t
    return max(free)


def run_matrix(data: ExperimentData, configs: list[ExperimentConfig],
               settings: Settings | None = None, jobs: int = 1) -> MatrixResult:
    """Run every non-skipped config; results come back in ``configs`` order.

    Configs sharing a view run in the same task so the view-level stages
    are computed once. Each config's outcome depends only on its own
    derived seeds, so ``jobs`` changes wall time, not results.
    """
    settings = settings or Settings()
    start = time.perf_counter()
    skipped = [c for c in configs if c.skip_reason]
    by_view: dict[str, list[ExperimentConfig]] = defaultdict(list)
    for c in configs:
        if not c.skip_reason:
            by_view[c.view_id].append(c)
    # largest views first keeps the pool busy at the tail
    tasks = sorted(by_view.values(), key=lambda cs: -len(data.views[cs[0].view_id]))
    outcomes = {}
    task_seconds = {}

    def collect(cs, batch, seconds):
        task_seconds[cs[0].view_id] = seconds
        for status, cfg, payload in batch:
            outcomes[cfg.config_id] = (status, cfg, payload)
            log.info("%s %s", status, cfg.config_id)

    if jobs <= 1 or len(tasks) <= 1:
        for cs in tasks:
            collect(cs, *_run_view(cs, data, settings))
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(data, settings)) as pool:
            for cs, (batch, seconds) in zip(tasks, pool.map(_run_view, tasks)):
                collect(cs, batch, seconds)
    results, failures = [], []
    for c in configs:
        if c.config_id not in outcomes:
            continue
        status, cfg, payload = outcomes[c.config_id]
        if status == "ok":
            results.append(payload)
        else:
            failures.append((cfg, payload))
    return MatrixResult(list(configs), results, skipped, failures,
                        time.perf_counter() - start, task_seconds)
