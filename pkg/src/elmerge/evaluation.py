"""Prediction, error metrics, and direct-vs-merged benchmark runs.

A benchmark run trains the same network (same feature-map seed) with the
direct solver and with the hierarchical and/or incremental procedures, then
reports wall times, test error rates, and the Frobenius distance of every
trained weight matrix from the directly trained one.  Timing covers
hidden-matrix computation plus solving; dataset loading, feature-map
generation and prediction are excluded.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import solvers
from .data import Dataset, one_hot
from .model import (
    Activation,
    RNG_ALGORITHM,
    compute_hidden_matrix,
    generate_feature_map,
    split_feature_map,
)

REPORT_SCHEMA_VERSION = 1

TIMING_POLICY = "hidden-matrix computation + solve; excludes loading, map generation, prediction"


def predict(fmap, W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Network scores F = H W, one row per sample."""
    if W.ndim != 2 or W.shape[0] != fmap.hidden_count:
        raise ValueError(
            f"weight shape {W.shape} does not match {fmap.hidden_count} hidden units"
        )
    return compute_hidden_matrix(fmap, X) @ W


def classify(F: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class index."""
    if F.ndim != 2 or F.shape[1] < 1:
        raise ValueError(f"scores must be (n, c) with c >= 1, got shape {F.shape}")
    return np.argmax(F, axis=1)


def error_rate(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Misclassification percentage."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    return 100.0 * float(np.count_nonzero(predicted != truth)) / predicted.shape[0]


def frobenius_diff(W_a: np.ndarray, W_b: np.ndarray) -> float:
    """Frobenius norm of the difference of two same-shape matrices."""
    if W_a.shape != W_b.shape:
        raise ValueError(f"shape mismatch: {W_a.shape} vs {W_b.shape}")
    return float(np.linalg.norm(W_a - W_b))


def relative_frobenius_diff(W: np.ndarray, reference: np.ndarray) -> float:
    """||W - reference||_F / ||reference||_F (absolute diff if reference is 0)."""
    denom = float(np.linalg.norm(reference))
    diff = frobenius_diff(W, reference)
    return diff / denom if denom > 0 else diff


@dataclass
class MethodRun:
    """One trained variant inside a benchmark report."""

    method: str
    neurons: int
    partition: object
    time_s: float
    error_pct: float
    frob_diff: float

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "neurons": self.neurons,
            "partition": self.partition,
            "time_s": self.time_s,
            "error_pct": self.error_pct,
            "frob_diff": self.frob_diff,
        }


@dataclass
class BenchReport:
    dataset: str
    activation: str
    alpha: float
    seed: int
    runs: list[MethodRun]
    meta: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "dataset": self.dataset,
            "activation": self.activation,
            "alpha": self.alpha,
            "seed": self.seed,
            "runs": [run.to_json_dict() for run in self.runs],
            "meta": self.meta,
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_text_table(self) -> str:
        header = f"{'method':<14} {'neurons':>8} {'partition':<26} {'time_s':>10} {'error_%':>8} {'frob_diff':>12}"
        lines = [
            f"dataset={self.dataset} activation={self.activation} "
            f"alpha={self.alpha:g} seed={self.seed}",
            header,
            "-" * len(header),
        ]
        for run in self.runs:
            part = json.dumps(run.partition) if run.partition is not None else "-"
            if len(part) > 26:
                part = part[:23] + "..."
            lines.append(
                f"{run.method:<14} {run.neurons:>8} {part:<26} "
                f"{run.time_s:>10.4f} {run.error_pct:>8.2f} {run.frob_diff:>12.3e}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["method,neurons,partition,time_s,error_pct,frob_diff"]
        for run in self.runs:
            part = json.dumps(run.partition) if run.partition is not None else ""
            lines.append(
                f"{run.method},{run.neurons},\"{part}\",{run.time_s!r},"
                f"{run.error_pct!r},{run.frob_diff!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CompareConfig:
    """What to train and how, for :func:`run_comparison`."""

    activation: Activation = Activation.SIGMOID
    neurons: int = 100
    alpha: float = solvers.DEFAULT_ALPHA
    seed: int = 0
    repeats: int = 5
    partition: object = None          # tree of leaf sizes, or None
    increments: list | None = None    # growth schedule, or None
    threads: int | None = None

    def __post_init__(self):
        if self.neurons < 1:
            raise ValueError(f"neurons must be >= 1, got {self.neurons}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.partition is not None:
            covered = sum(solvers.flatten_partition(self.partition))
            if covered != self.neurons:
                raise ValueError(
                    f"partition covers {covered} units, expected {self.neurons}"
                )
        if self.increments is not None:
            if not self.increments or any(int(i) < 1 for i in self.increments):
                raise ValueError(f"increments must be positive counts, got {self.increments}")
            if sum(int(i) for i in self.increments) != self.neurons:
                raise ValueError(
                    f"increments sum to {sum(self.increments)}, expected {self.neurons}"
                )


def _train_incremental(X, Y, fmap, increments, cfg):
    blocks = split_feature_map(fmap, increments)
    state = solvers.incremental_init(X, Y, blocks[0], cfg)
    for block in blocks[1:]:
        state = solvers.incremental_add(state, block, X, Y, cfg)
    return state.weight


def run_comparison(train: Dataset, test: Dataset, config: CompareConfig) -> BenchReport:
    """Train every configured variant, time it, and assemble a report.

    All variants share one feature map drawn from ``config.seed``, so their
    weights are directly comparable.  Each variant is trained
    ``config.repeats`` times and the wall times averaged; weights are
    deterministic across repeats.
    """
    cfg = solvers.RidgeConfig(alpha=config.alpha)
    fmap = generate_feature_map(
        train.input_dim, config.neurons, config.activation, config.seed
    )
    X, Y = train.features, one_hot(train.labels, train.class_count)

    def time_method(fn):
        times, result = [], None
        for _ in range(config.repeats):
            t0 = time.perf_counter()
            result = fn()
            times.append(time.perf_counter() - t0)
        return result, times

    methods: list[tuple[str, object, object]] = [
        ("direct", None, lambda: solvers.solve_auto(compute_hidden_matrix(fmap, X), Y, cfg)),
    ]
    if config.partition is not None:
        methods.append(
            (
                "hierarchical",
                config.partition,
                lambda: solvers.hierarchical_train(
                    X, Y, fmap, config.partition, cfg, max_workers=config.threads
                ),
            )
        )
    if config.increments is not None:
        increments = [int(i) for i in config.increments]
        methods.append(
            (
                "incremental",
                increments,
                lambda: _train_incremental(X, Y, fmap, increments, cfg),
            )
        )

    runs = []
    all_times = {}
    weights = {}
    for method, partition, fn in methods:
        W, times = time_method(fn)
        weights[method] = W
        all_times[method] = times
        runs.append((method, partition, float(np.mean(times))))

    W_direct = weights["direct"]
    report_runs = []
    for method, partition, avg_time in runs:
        scores = predict(fmap, weights[method], test.features)
        err = error_rate(classify(scores), test.labels)
        report_runs.append(
            MethodRun(
                method=method,
                neurons=config.neurons,
                partition=partition,
                time_s=avg_time,
                error_pct=err,
                frob_diff=frobenius_diff(weights[method], W_direct),
            )
        )

    return BenchReport(
        dataset=train.name,
        activation=config.activation.value,
        alpha=config.alpha,
        seed=config.seed,
        runs=report_runs,
        meta={
            "rng": RNG_ALGORITHM,
            "timing": TIMING_POLICY,
            "repeats": config.repeats,
            "threads": config.threads,
            "evaluated_on": test.split,
            "times": all_times,
        },
    )
