"""Training runs and the two experiment sweeps.

A run trains one network on a seeded subsample of the training set and
evaluates it on that subsample and on the full test set.  Sweeps are grids of
runs; each run is independent, so they may execute in parallel, but results
are always written in grid order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from mipnn import network
from mipnn.baseline import GDParams, train_gd
from mipnn.data import fit_encode, load_encoded, subsample, synthetic_tables
from mipnn.errors import ConfigError, InputError, MipnnError
from mipnn.mip import OBJECTIVES, PwlSpec, build_training_model, linearize_indicators
from mipnn.solve import SolveParams, Status, decode_network, make_stop_callback, objective_target, solve
from mipnn.solve.heuristic import local_search, network_hint

log = logging.getLogger(__name__)

MODELS = (*OBJECTIVES, "gd")
RESULT_COLUMNS = (
    "model",
    "objective",
    "p",
    "n_samples",
    "seed",
    "train_acc",
    "test_acc",
    "wall_time_s",
    "status",
    "objective_value",
)
SUMMARY_COLUMNS = (
    "model",
    "p",
    "n_samples",
    "runs",
    "mean_train_acc",
    "mean_test_acc",
    "mean_wall_time_s",
    "mean_objective_value",
)
RESULTS_VERSION = 1
GD_STATUS = "trained"
GD_OBJECTIVE = "squared-hinge"


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...] = MODELS
    p_values: tuple[int, ...] = (1,)
    sample_counts: tuple[int, ...] = (10, 20, 40)
    seeds: tuple[int, ...] = (1, 2, 3)
    hidden: tuple[int, ...] = (16,)
    time_limit: float = 600.0
    accuracy_stop: float | None = 0.9
    backend: str = "builtin"
    solver_cmd: str | None = None
    form: str = "indicator"
    data: str | None = None
    margin: float = 0.5
    eps: float = 1e-5
    pwl_spacing: float = 0.25
    warm_start: bool = True
    warm_start_budget: float = 10.0
    learning_rate: float = 0.1
    epochs: int = 500
    batch_size: int = 16
    jobs: int = 1

    def __post_init__(self):
        for name in ("models", "p_values", "sample_counts", "seeds", "hidden"):
            value = getattr(self, name)
            if isinstance(value, (str, int)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        if not self.models or not self.sample_counts or not self.seeds or not self.p_values:
            raise ConfigError("models, p_values, sample_counts and seeds must be non-empty")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; choose from {list(MODELS)}")
        for name in ("p_values", "sample_counts", "hidden"):
            for v in getattr(self, name):
                if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                    raise ConfigError(f"{name} entries must be positive integers, got {v!r}")
        if not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")
        if self.accuracy_stop is not None and not 0 < self.accuracy_stop <= 1:
            raise ConfigError("accuracy_stop must lie in (0, 1]")
        if self.backend not in ("builtin", "external"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.form not in ("indicator", "linearized"):
            raise ConfigError(f"unknown form {self.form!r}")
        if not 0 < self.margin <= 1 or not self.eps > 0 or not self.pwl_spacing > 0:
            raise ConfigError("margin must lie in (0, 1]; eps and pwl_spacing must be positive")
        if self.learning_rate < 0 or self.epochs < 1 or self.batch_size < 1 or self.jobs < 1:
            raise ConfigError("learning_rate must be >= 0; epochs, batch_size and jobs >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    def pwl(self) -> PwlSpec:
        try:
            return PwlSpec.uniform(self.pwl_spacing, self.margin)
        except InputError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class RunRecord:
    model: str
    objective: str
    p: int
    n_samples: int
    seed: int
    train_acc: float | None
    test_acc: float | None
    wall_time_s: float
    status: str
    objective_value: float | None
    nodes: int | None = None
    subset_hash: str = ""
    message: str = ""
    config: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in RESULT_COLUMNS}

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class TrainResult:
    record: RunRecord
    network: object  # IntegerNetwork, or None without an incumbent
    history: object = None  # baseline training history


@dataclass(frozen=True, eq=False)
class Datasets:
    train: object
    test: object


def load_datasets(path: str | None) -> Datasets:
    """Encoded train/test sets from a ``prep-data`` directory, or the synthetic fixture."""
    if path is None:
        train, test = fit_encode(*synthetic_tables())
        return Datasets(train, test)
    root = Path(path)
    if not root.is_dir():
        raise InputError(f"dataset directory not found: {root}")
    return Datasets(load_encoded(root / "train"), load_encoded(root / "test"))


def subset_hash(data) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(data.features).tobytes())
    digest.update(np.ascontiguousarray(data.labels).tobytes())
    return digest.hexdigest()[:16]


def _architecture(config: ExperimentConfig, data) -> list[int]:
    return [data.n_features, *config.hidden, data.n_classes]


def train_network(config: ExperimentConfig, datasets: Datasets, model: str, p: int, n: int, seed: int) -> TrainResult:
    """One training run on the seeded subsample of size ``n``."""
    if n > len(datasets.train):
        raise ConfigError(f"{n} samples requested but the training set has {len(datasets.train)}")
    sub = subsample(datasets.train, n, seed)
    sizes = _architecture(config, sub)
    snapshot = config.to_dict()
    if model == "gd":
        return _train_gd(config, datasets, sub, sizes, seed, snapshot)

    mip, vm = build_training_model(sub, sizes, p, model, eps=config.eps, margin=config.margin, pwl=config.pwl())
    if config.backend == "external" or config.form == "linearized":
        mip = linearize_indicators(mip)
    start = time.perf_counter()
    hint = None
    if config.backend == "builtin" and config.warm_start:
        budget = min(config.warm_start_budget, 0.1 * config.time_limit)
        guess = local_search(
            sub, sizes, p, model, seed=seed, time_budget=budget, eps=config.eps, margin=config.margin, pwl=config.pwl()
        )
        hint = network_hint(guess, vm)
    remaining = max(config.time_limit - (time.perf_counter() - start), 1e-3)
    stop = config.accuracy_stop
    params = SolveParams(
        time_limit=remaining,
        seed=seed,
        stop_at_train_accuracy=stop,
        objective_target=objective_target(vm, n, stop) if config.backend == "external" else None,
        backend=config.backend,
        command=config.solver_cmd,
        stop_callback=make_stop_callback(vm, sub, stop, seed) if stop is not None else None,
        hint=hint,
    )
    outcome = solve(mip, params)
    wall = time.perf_counter() - start
    net = train_acc = test_acc = None
    if outcome.has_solution:
        net = decode_network(outcome.assignment, vm)
        train_acc = network.accuracy(net, sub, seed)
        test_acc = network.accuracy(net, datasets.test, seed)
    record = RunRecord(
        model, model, p, n, seed, train_acc, test_acc, wall, str(outcome.status), outcome.objective,
        outcome.nodes, subset_hash(sub), outcome.message, snapshot,
    )
    return TrainResult(record, net)


def _train_gd(config, datasets, sub, sizes, seed, snapshot):
    start = time.perf_counter()
    latent, history = train_gd(sub, sizes, GDParams(config.learning_rate, config.epochs, config.batch_size, seed))
    wall = time.perf_counter() - start
    net = latent.binarize()
    record = RunRecord(
        "gd", GD_OBJECTIVE, 1, len(sub), seed,
        network.accuracy(net, sub, seed), network.accuracy(net, datasets.test, seed),
        wall, GD_STATUS, history.loss[-1], None, subset_hash(sub), "", snapshot,
    )
    return TrainResult(record, net, history)


def _run_task(config, datasets, task) -> RunRecord:
    model, p, n, seed = task
    try:
        record = train_network(config, datasets, model, p, n, seed).record
    except (MipnnError, ValueError, OSError) as exc:
        log.warning("run %s failed: %s", task, exc)
        objective = GD_OBJECTIVE if model == "gd" else model
        record = RunRecord(model, objective, p, n, seed, None, None, 0.0, str(Status.ERROR), None,
                           message=str(exc), config=config.to_dict())
    return record


def experiment_tasks(kind: str, config: ExperimentConfig) -> list[tuple]:
    if kind == "exp1":
        p = config.p_values[0]
        return [(m, 1 if m == "gd" else p, n, s) for m in config.models for n in config.sample_counts for s in config.seeds]
    if kind == "exp2":
        return [("sat-margin", p, n, s) for p in config.p_values for n in config.sample_counts for s in config.seeds]
    raise ConfigError(f"unknown experiment {kind!r}")


def run_experiment(kind: str, config: ExperimentConfig, datasets: Datasets | None = None, progress=None) -> list[RunRecord]:
    """Run every task of the sweep; records come back in grid order."""
    datasets = datasets or load_datasets(config.data)
    largest = max(config.sample_counts)
    if largest > len(datasets.train):
        raise ConfigError(f"sample count {largest} exceeds the {len(datasets.train)} training rows")
    tasks = experiment_tasks(kind, config)
    if config.jobs == 1:
        records = []
        for task in tasks:
            records.append(_run_task(config, datasets, task))
            if progress:
                progress(records[-1])
        return records
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        futures = [pool.submit(_run_task, config, datasets, task) for task in tasks]
        records = []
        for future in futures:
            records.append(future.result())
            if progress:
                progress(records[-1])
    return records


def _fmt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return value


def results_frame(records) -> pd.DataFrame:
    return pd.DataFrame([{k: _fmt(v) for k, v in r.row().items()} for r in records], columns=list(RESULT_COLUMNS))


def summarize(records) -> pd.DataFrame:
    """Per (model, p, n) arithmetic means over seeds; failed runs are left out of the means."""
    frame = pd.DataFrame([r.row() for r in records], columns=list(RESULT_COLUMNS))
    for col in ("train_acc", "test_acc", "wall_time_s", "objective_value"):
        frame[col] = pd.to_numeric(frame[col], errors="coerce")
    grouped = frame.groupby(["model", "p", "n_samples"], sort=False)
    summary = grouped.agg(
        runs=("seed", "size"),
        mean_train_acc=("train_acc", "mean"),
        mean_test_acc=("test_acc", "mean"),
        mean_wall_time_s=("wall_time_s", "mean"),
        mean_objective_value=("objective_value", "mean"),
    ).reset_index()
    return summary[list(SUMMARY_COLUMNS)]


PLOT_SCRIPT = '''"""Plot mean accuracy and wall time from a summary CSV (needs pandas and matplotlib)."""
import sys

import matplotlib.pyplot as plt
import pandas as pd

summary = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else "summary.csv")
fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for (model, p), group in summary.groupby(["model", "p"]):
    label = f"{model} P={p}"
    axes[0].plot(group["n_samples"], group["mean_train_acc"], marker="o", label=label)
    axes[1].plot(group["n_samples"], group["mean_test_acc"], marker="o", label=label)
    axes[2].plot(group["n_samples"], group["mean_wall_time_s"], marker="o", label=label)
for ax, title in zip(axes, ("train accuracy", "test accuracy", "wall time [s]")):
    ax.set_xlabel("training samples")
    ax.set_title(title)
axes[0].legend()
fig.tight_layout()
fig.savefig(sys.argv[2] if len(sys.argv) > 2 else "results.png", dpi=120)
'''


def write_results(records, out_dir, config: ExperimentConfig, kind: str) -> dict:
    """Write results.csv, summary.csv, runs.jsonl, config.json and plot.py into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "summary": out / "summary.csv",
        "runs": out / "runs.jsonl",
        "config": out / "config.json",
        "plot": out / "plot.py",
    }
    results_frame(records).to_csv(paths["results"], index=False)
    summarize(records).to_csv(paths["summary"], index=False)
    with paths["runs"].open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    doc = {"experiment": kind, "results_version": RESULTS_VERSION, "config": config.to_dict()}
    paths["config"].write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    paths["plot"].write_text(PLOT_SCRIPT, encoding="utf-8")
    return paths
