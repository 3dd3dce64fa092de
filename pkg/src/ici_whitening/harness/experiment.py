"""
Experiment runner.

An experiment is split into independent (grid point, drop) tasks. Each task
builds its drop from a seed derived from the master seed and the drop index,
trains the requested detectors and evaluates them (or the IW policies). Tasks
may run in a process pool; their results are collected in task order and
written by this process only, so the worker count never changes output bytes.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ici_whitening.config import ExperimentSpec, ScenarioConfig, dump_config
from ici_whitening.detectors import BaseDetector, DetectorRegistry
from ici_whitening.detectors.triggers import trigger
from ici_whitening.errors import KOutOfRangeError
from ici_whitening.harness import reporting
from ici_whitening.logging_helper import log_experiment_completed, log_experiment_started, log_task_completed
from ici_whitening.metrics import UNDEFINED, classification_metrics, confusion
from ici_whitening.receiver import IwPolicy, evaluate_policy_ser
from ici_whitening.scenario import LabeledSample, build_drop, feature_matrix, make_datasets
from ici_whitening.seeding import derive_rng, derive_seed
from ici_whitening.telemetry import RunMetrics
from ici_whitening.whitening import verify_bound_grid

logger = logging.getLogger(__name__)

DETECTION_COLUMNS = [
    "grid_value", "detector", "drop", "seed", "n_train",
    "tp", "fp", "fn", "tn", "sensitivity", "precision", "f1",
]
DETECTION_AGG_COLUMNS = [
    "grid_value", "detector", "n_drops",
    "sensitivity", "sensitivity_defined", "precision", "precision_defined", "f1", "f1_defined",
]
SER_COLUMNS = [
    "grid_value", "policy", "drop", "seed", "n_train", "ser", "errors", "symbols", "activations", "fallbacks",
]
SER_AGG_COLUMNS = ["grid_value", "policy", "n_drops", "ser", "activations", "fallbacks"]
SER_POSITION_COLUMNS = ["radius_m", "policy", "drop", "position", "ser", "activated", "fallback"]
BERNSTEIN_COLUMNS = [
    "epsilon", "t_s", "sigma_m", "g_norm", "bound", "empirical_probability", "trials", "vacuous", "violated",
]
BERNSTEIN_AGG_COLUMNS = ["t_s", "points", "vacuous_points", "violated_points", "min_margin"]

BASE_POLICIES = ("always_off", "always_on", "genie")


@dataclass(frozen=True)
class Task:
    spec: ExperimentSpec
    grid_index: int
    grid_value: float
    drop_index: int
    seed: int


@dataclass
class TaskResult:
    rows: List[Dict[str, Any]] = field(default_factory=list)
    position_rows: List[Dict[str, Any]] = field(default_factory=list)
    fit_seconds: Dict[str, float] = field(default_factory=dict)
    fallbacks: Dict[str, int] = field(default_factory=dict)
    seconds: float = 0.0


@dataclass(frozen=True)
class RunSummary:
    kind: str
    master_seed: int
    output_dir: Path
    files: Dict[str, Path]
    n_tasks: int


# ========== Planning ==========

def plan_tasks(spec: ExperimentSpec, master_seed: int) -> List[Task]:
    """
    Tasks in (grid point, drop) order. Drop d uses derive_seed(master, d) at
    every grid point; the concentration-bound sweep has one task per T_s.
    """
    tasks = []
    for g, value in enumerate(spec.grid):
        if spec.kind == "bernstein":
            tasks.append(Task(spec, g, value, 0, derive_seed(master_seed, g)))
            continue
        for d in range(spec.n_drops):
            tasks.append(Task(spec, g, value, d, derive_seed(master_seed, d)))
    return tasks


def scenario_for(spec: ExperimentSpec, grid_value: float) -> ScenarioConfig:
    if spec.kind == "f1_vs_nf":
        return spec.scenario.model_copy(update={"n_f_per_rb": int(grid_value)})
    if spec.kind in ("detection_vs_radius", "ser_vs_radius"):
        return spec.scenario.model_copy(update={"cell_radius_m": float(grid_value)})
    return spec.scenario


def training_size(spec: ExperimentSpec, grid_value: float) -> Optional[int]:
    if spec.kind == "f1_vs_nt":
        return int(grid_value)
    return spec.n_train


# ========== Task execution ==========

def select_training(samples: Sequence[LabeledSample], thresholds) -> List[LabeledSample]:
    """Training positions where the train trigger fires; all of them if none does."""
    selected = [
        s for s in samples
        if trigger("train", s.rsrp_serving_dbm, s.rsrp_neighbor_dbm, s.csi_im, thresholds)
    ]
    if not selected:
        logger.warning("Train trigger fired at no training position; training on all of them")
        return list(samples)
    return selected


def subsample(samples: Sequence[LabeledSample], n: Optional[int], seed: int) -> List[LabeledSample]:
    """Random subset of n samples (order preserved), drawn from the drop's subsample stream."""
    if n is None or n >= len(samples):
        return list(samples)
    keep = np.sort(derive_rng(seed, "subsample", n).choice(len(samples), size=n, replace=False))
    return [samples[i] for i in keep]


def training_set(samples: Sequence[LabeledSample], thresholds, n: Optional[int], seed: int) -> List[LabeledSample]:
    """Triggered training positions, subsampled to n; warns when fewer than n are available."""
    selected = select_training(samples, thresholds)
    if n is not None and len(selected) < n:
        logger.warning(f"Only {len(selected)} training positions pass the train trigger; using N_t={len(selected)} instead of {n}")
    return subsample(selected, n, seed)


def fit_detectors(spec: ExperimentSpec, x_train: np.ndarray, seed: int) -> Dict[str, Optional[BaseDetector]]:
    """Fit every requested detector; None marks one that cannot be fitted (k above N_t)."""
    train_cfg = spec.train.model_copy(update={"seed": derive_seed(seed, "train")})
    fitted: Dict[str, Optional[BaseDetector]] = {}
    for name in spec.detectors:
        detector = DetectorRegistry.get_detector(name, train_cfg, spec.baselines)
        try:
            fitted[name] = detector.fit(x_train)
        except KOutOfRangeError as e:
            logger.warning(f"Skipping {name} on {x_train.shape[0]} training samples: {e}")
            fitted[name] = None
    return fitted


def _detection_rows(task: Task, detectors, x_test, y_test, n_train: int) -> List[Dict[str, Any]]:
    rows = []
    for name, detector in detectors.items():
        row = {
            "grid_value": task.grid_value,
            "detector": name,
            "drop": task.drop_index,
            "seed": task.seed,
            "n_train": n_train,
        }
        if detector is None:
            row.update({k: UNDEFINED for k in ("tp", "fp", "fn", "tn", "sensitivity", "precision", "f1")})
        else:
            predictions = [detector.is_anomalous(x) for x in x_test]
            cm = confusion(predictions, y_test)
            row.update({"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn})
            row.update(classification_metrics(cm))
        rows.append(row)
    return rows


def _ser_rows(task: Task, drop, detectors, thresholds, scenario: ScenarioConfig, n_train: int, result: TaskResult) -> None:
    policies = [IwPolicy(kind) for kind in BASE_POLICIES]
    policies += [IwPolicy.from_detector(d, thresholds) for d in detectors.values() if d is not None]
    for policy in policies:
        ser = evaluate_policy_ser(drop, policy, scenario, rng=task.seed)
        result.fallbacks[policy.name] = ser.fallbacks
        result.rows.append({
            "grid_value": task.grid_value,
            "policy": policy.name,
            "drop": task.drop_index,
            "seed": task.seed,
            "n_train": n_train,
            "ser": ser.ser,
            "errors": ser.errors,
            "symbols": ser.symbols,
            "activations": ser.activations,
            "fallbacks": ser.fallbacks,
        })
        for p in ser.positions:
            result.position_rows.append({
                "radius_m": task.grid_value,
                "policy": policy.name,
                "drop": task.drop_index,
                "position": p.position,
                "ser": p.ser,
                "activated": p.activated,
                "fallback": p.fallback,
            })


def run_task(task: Task) -> TaskResult:
    start = time.perf_counter()
    spec = task.spec
    result = TaskResult()

    if spec.kind == "bernstein":
        result.rows = verify_bound_grid(task.seed, spec.bernstein, [int(task.grid_value)])
        result.seconds = time.perf_counter() - start
        return result

    scenario = scenario_for(spec, task.grid_value)
    drop = build_drop(task.seed, scenario, spec.channel)
    thresholds = spec.triggers.resolved(drop.noise_variance)
    datasets = make_datasets(drop, scenario)

    train = training_set(datasets["train"], thresholds, training_size(spec, task.grid_value), task.seed)
    x_train, _ = feature_matrix(train)
    detectors = fit_detectors(spec, x_train, task.seed)
    result.fit_seconds = {name: d.fit_seconds for name, d in detectors.items() if d is not None}

    if spec.kind == "ser_vs_radius":
        _ser_rows(task, drop, detectors, thresholds, scenario, len(train), result)
    else:
        x_test, y_test = feature_matrix(datasets["test"])
        result.rows = _detection_rows(task, detectors, x_test, y_test, len(train))

    result.seconds = time.perf_counter() - start
    return result


def _execute(tasks: Sequence[Task], jobs: int) -> List[TaskResult]:
    if jobs <= 1 or len(tasks) <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(run_task, tasks))


# ========== Output ==========

def _write_outputs(spec: ExperimentSpec, out: Path, results: Sequence[TaskResult]) -> Dict[str, Path]:
    rows = [row for r in results for row in r.rows]
    kind = spec.kind
    files: Dict[str, Path] = {}

    if kind == "bernstein":
        files["raw"] = reporting.write_csv(out / f"{kind}_raw.csv", BERNSTEIN_COLUMNS, rows)
        files["agg"] = reporting.write_csv(out / f"{kind}_agg.csv", BERNSTEIN_AGG_COLUMNS, bernstein_summary(rows))
    elif kind == "ser_vs_radius":
        files["raw"] = reporting.write_csv(out / f"{kind}_raw.csv", SER_COLUMNS, rows)
        agg = reporting.aggregate_rows(rows, ["grid_value", "policy"], ["ser", "activations", "fallbacks"])
        files["agg"] = reporting.write_csv(out / f"{kind}_agg.csv", SER_AGG_COLUMNS, agg)
        position_rows = [row for r in results for row in r.position_rows]
        files["positions"] = reporting.write_csv(out / f"{kind}_positions.csv", SER_POSITION_COLUMNS, position_rows)
    else:
        files["raw"] = reporting.write_csv(out / f"{kind}_raw.csv", DETECTION_COLUMNS, rows)
        agg = reporting.aggregate_rows(rows, ["grid_value", "detector"], ["sensitivity", "precision", "f1"])
        files["agg"] = reporting.write_csv(out / f"{kind}_agg.csv", DETECTION_AGG_COLUMNS, agg)
    return files


def bernstein_summary(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Per T_s: point counts and the smallest empirical-minus-bound margin over non-vacuous points."""
    out = []
    for t_s in dict.fromkeys(r["t_s"] for r in rows):
        members = [r for r in rows if r["t_s"] == t_s]
        margins = [r["empirical_probability"] - r["bound"] for r in members if not r["vacuous"]]
        out.append({
            "t_s": t_s,
            "points": len(members),
            "vacuous_points": sum(r["vacuous"] for r in members),
            "violated_points": sum(r["violated"] for r in members),
            "min_margin": min(margins) if margins else UNDEFINED,
        })
    return out


def run_experiment(
    spec: ExperimentSpec,
    master_seed: Optional[int] = None,
    output_dir: Optional[Path] = None,
    jobs: int = 1,
    dry_run: bool = False,
) -> RunSummary:
    """
    Run every task of an experiment and write <kind>_raw.csv, <kind>_agg.csv
    (plus per-position SER for ser_vs_radius), manifest.json and metrics.prom.
    With dry_run only the task plan is built and logged.
    """
    master_seed = spec.scenario.seed if master_seed is None else master_seed
    out = Path(output_dir or spec.output_dir)
    tasks = plan_tasks(spec, master_seed)
    logger.info(f"{spec.kind}: {len(tasks)} tasks, master seed {master_seed}, output {out}")
    if dry_run:
        for t in tasks:
            logger.info(f"  task grid={t.grid_value:g} drop={t.drop_index} seed={t.seed}")
        return RunSummary(spec.kind, master_seed, out, {}, len(tasks))

    out.mkdir(parents=True, exist_ok=True)
    log_experiment_started(spec.kind, len(tasks), master_seed, str(out))
    start = time.perf_counter()

    results = _execute(tasks, jobs)
    metrics = RunMetrics()
    for task, result in zip(tasks, results):
        metrics.record_task(spec.kind, result.seconds, result.fit_seconds, result.fallbacks)
        log_task_completed(spec.kind, task.grid_value, task.drop_index, result.seconds)

    files = _write_outputs(spec, out, results)
    config = spec.model_dump(mode="json")
    reporting.write_manifest(out / "manifest.json", spec.kind, master_seed, dump_config(spec), config, files, len(tasks))

    elapsed = time.perf_counter() - start
    metrics.run_seconds.set(elapsed)
    metrics.write(out / "metrics.prom")
    log_experiment_completed(spec.kind, {k: str(v) for k, v in files.items()}, elapsed)
    logger.info(f"{spec.kind} finished in {elapsed:.1f}s; wrote {', '.join(p.name for p in files.values())}")
    return RunSummary(spec.kind, master_seed, out, files, len(tasks))
