"""
Prometheus Metrics for Experiment Runs

Counters, histograms and gauges live on a dedicated CollectorRegistry so
repeated runs in one process (tests) do not collide with the global registry.
Values are recorded in the parent process from task results and written to a
text file at the end of a run.
"""

import logging
from pathlib import Path
from typing import Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram
from prometheus_client.exposition import generate_latest, write_to_textfile

logger = logging.getLogger(__name__)


class RunMetrics:
    """Metric families for one experiment run."""

    def __init__(self):
        self.registry = CollectorRegistry()

        # ========== Counter Metrics ==========

        self.tasks_completed = Counter(
            'ici_tasks_completed_total',
            'Total number of (grid point, drop) tasks completed',
            ['kind'],
            registry=self.registry,
        )
        self.drops_built = Counter(
            'ici_drops_built_total',
            'Total number of scenario drops built',
            registry=self.registry,
        )
        self.iw_fallbacks = Counter(
            'ici_iw_fallbacks_total',
            'Positions where whitening failed and plain MRC was used',
            ['policy'],
            registry=self.registry,
        )

        # ========== Histogram Metrics ==========

        self.detector_fit_seconds = Histogram(
            'ici_detector_fit_seconds',
            'Detector training duration in seconds',
            ['detector'],
            buckets=[0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0],
            registry=self.registry,
        )
        self.task_seconds = Histogram(
            'ici_task_seconds',
            'Task duration in seconds',
            ['kind'],
            buckets=[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0],
            registry=self.registry,
        )

        # ========== Gauge Metrics ==========

        self.run_seconds = Gauge(
            'ici_run_seconds',
            'Wall-clock duration of the last run',
            registry=self.registry,
        )

    def record_task(self, kind: str, seconds: float, fit_seconds: dict, fallbacks: dict) -> None:
        self.tasks_completed.labels(kind=kind).inc()
        if kind != "bernstein":
            self.drops_built.inc()
        self.task_seconds.labels(kind=kind).observe(seconds)
        for detector, value in fit_seconds.items():
            self.detector_fit_seconds.labels(detector=detector).observe(value)
        for policy, count in fallbacks.items():
            if count:
                self.iw_fallbacks.labels(policy=policy).inc(count)

    def render(self) -> bytes:
        return generate_latest(self.registry)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        write_to_textfile(str(path), self.registry)
        logger.debug(f"Wrote run metrics to {path}")
        return path
