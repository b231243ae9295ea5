"""Off-policy evaluation on uniformly logged layout data.

The replay method streams logged ``(layout, reward)`` rows and counts only
the rows where the evaluated policy proposes the logged layout. Per-arm values
for regret reporting come from a positive-part James-Stein estimate over the
logged data.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .core import ConfigError, DimensionSpec, SpecError, StateStore
from .metrics import RunHistory
from .policies import PolicyConfig, select_arm
from .simulator import SimulatorModel

OPE_HEADER = ("policy", "repetition", "matched_steps", "estimated_value", "regret_vs_best_arm")


@dataclass
class LoggedDataset:
    """Logged plays, assumed collected by a uniform-random logging policy."""

    spec: DimensionSpec
    layouts: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        self.layouts = np.asarray(self.layouts, dtype=np.int64).reshape(-1, self.spec.dims)
        self.rewards = np.asarray(self.rewards, dtype=np.int64)
        if len(self.layouts) != len(self.rewards):
            raise SpecError("layouts and rewards differ in length")
        if np.any(self.layouts < 0) or np.any(self.layouts >= np.array(self.spec.choices)):
            raise SpecError("layout choice out of range")
        if not np.isin(self.rewards, (0, 1)).all():
            raise SpecError("rewards must be binary")

    def __len__(self):
        return len(self.rewards)

    def arm_stats(self) -> "ArmStats":
        idx = np.ravel_multi_index(tuple(self.layouts.T), self.spec.choices)
        n = self.spec.n_arms
        return ArmStats(np.bincount(idx, weights=self.rewards, minlength=n).astype(np.int64),
                        np.bincount(idx, minlength=n).astype(np.int64))


@dataclass
class ArmStats:
    successes: np.ndarray
    counts: np.ndarray

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.successes / np.maximum(self.counts, 1), np.nan)


def james_stein(stats: ArmStats) -> np.ndarray:
    """Positive-part James-Stein shrinkage of per-arm means toward their grand mean.

    ``shrunk = xbar + c (x - xbar)`` with
    ``c = max(0, 1 - (k - 3) s2 / sum((x - xbar)**2))`` where ``s2`` is the mean
    binomial variance ``x (1 - x) / n`` of the arm means. Fewer than four arms
    are returned unshrunk. Arms never played are excluded (NaN) with a warning.
    """
    means = stats.means
    played = stats.counts > 0
    if not played.all():
        warnings.warn(f"{(~played).sum()} arm(s) with no plays excluded from shrinkage")
    out = means.copy()
    x = means[played]
    k = x.size
    if k < 4:
        return out
    xbar = x.mean()
    spread = np.sum((x - xbar) ** 2)
    if spread == 0:
        return out
    s2 = np.mean(x * (1 - x) / stats.counts[played])
    c = max(0.0, 1.0 - (k - 3) * s2 / spread)
    out[played] = np.clip(xbar + c * (x - xbar), 0.0, 1.0)
    return out


@dataclass
class ReplayResult:
    history: RunHistory
    rows_scanned: int
    cycles: int

    @property
    def matched_steps(self) -> int:
        return len(self.history)

    @property
    def match_rate(self) -> float:
        return self.matched_steps / self.rows_scanned if self.rows_scanned else 0.0

    @property
    def estimated_value(self) -> float:
        return float(self.history.rewards.mean()) if self.matched_steps else float("nan")


def _as_chooser(policy) -> tuple[Callable, Callable[[DimensionSpec], StateStore]]:
    if isinstance(policy, PolicyConfig):
        return (lambda store, rng: select_arm(policy, store, rng)), policy.make_store
    return policy, (lambda spec: StateStore(spec, 1, track_full=True))


def replay_evaluate(policy, dataset: LoggedDataset, steps: int, rng: np.random.Generator,
                    max_rows: int | None = None) -> ReplayResult:
    """Replay a policy against logged rows until ``steps`` rows have matched.

    ``policy`` is a :class:`PolicyConfig` or any ``f(store, rng) -> layout``.
    Rows are cycled when exhausted. A matched row's reward is fed back into
    the policy's store; unmatched rows change nothing. Stops early after
    ``max_rows`` scanned rows (default ``1000 * steps * n_arms``).
    """
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    choose, make_store = _as_chooser(policy)
    spec = dataset.spec
    store = make_store(spec)
    if max_rows is None:
        max_rows = 1000 * steps * spec.n_arms
    logged = [tuple(int(v) for v in row) for row in dataset.layouts]
    rewards = dataset.rewards.tolist()
    layouts_out, rewards_out = [], []
    scanned = 0
    n = len(logged)
    while len(rewards_out) < steps and scanned < max_rows:
        i = scanned % n
        scanned += 1
        if tuple(choose(store, rng)) == logged[i]:
            store.update(logged[i], rewards[i])
            layouts_out.append(logged[i])
            rewards_out.append(rewards[i])
    history = RunHistory(spec, np.array(layouts_out, dtype=np.int64).reshape(-1, spec.dims),
                         rewards_out)
    return ReplayResult(history, scanned, (scanned - 1) // n if scanned else 0)


def replay_report_row(label: str, repetition: int, result: ReplayResult,
                      arm_values: np.ndarray) -> tuple:
    """One OPE report row; regret is measured against the best shrunk arm value."""
    if result.matched_steps:
        chosen = arm_values[result.history.arm_indices]
        regret = float(np.nanmax(arm_values) - chosen.mean())
    else:
        regret = float("nan")
    return (label, repetition, result.matched_steps, result.estimated_value, regret)


# -- logged data I/O --------------------------------------------------------

def write_logged(path, dataset: LoggedDataset) -> None:
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow([f"dim_{d + 1}" for d in range(dataset.spec.dims)] + ["reward"])
        for layout, r in zip(dataset.layouts.tolist(), dataset.rewards.tolist()):
            w.writerow([v + 1 for v in layout] + [r])


def ingest_logged(path, spec: DimensionSpec | None = None) -> LoggedDataset:
    """Read a ``dim_1,...,dim_D,reward`` CSV with 1-based choices.

    Without ``spec`` the arm space is inferred from the largest choice seen per
    dimension. Malformed rows raise :class:`SpecError` naming the line.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None:
            raise SpecError(f"{path}: empty file")
        header = [h.strip() for h in header]
        D = len(header) - 1
        expected = [f"dim_{d + 1}" for d in range(D)] + ["reward"]
        if D < 1 or header != expected or (spec is not None and D != spec.dims):
            raise SpecError(f"{path}: bad header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != D + 1:
                raise SpecError(f"{path}:{lineno}: expected {D + 1} fields, got {len(row)}")
            try:
                values = [int(v) for v in row]
            except ValueError:
                raise SpecError(f"{path}:{lineno}: non-integer field in {row}") from None
            *layout, reward = values
            if reward not in (0, 1):
                raise SpecError(f"{path}:{lineno}: reward {reward} is not binary")
            for d, v in enumerate(layout):
                if v < 1 or (spec is not None and v > spec.choices[d]):
                    raise SpecError(f"{path}:{lineno}: choice {v} out of range for dim_{d + 1}")
            rows.append(values)
    data = np.array(rows, dtype=np.int64).reshape(-1, D + 1)
    if spec is None:
        if len(data) == 0:
            raise SpecError(f"{path}: no rows to infer the arm space from")
        spec = DimensionSpec(tuple(int(c) for c in data[:, :D].max(axis=0)))
    return LoggedDataset(spec, data[:, :D] - 1, data[:, D])


def discretize_features(features, labels, bins) -> LoggedDataset:
    """Map numeric features to equal-frequency bins and labels to rewards.

    Parameters
    ----------
    features : array-like, shape (n_rows, n_features)
    labels : array-like, shape (n_rows,)
        ``{-1, +1}`` or ``{0, 1}``; ``-1`` maps to ``0``.
    bins : int or sequence of int
        Choices per feature (a :class:`DimensionSpec` is accepted too).
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise SpecError("features must be two-dimensional")
    n, p = X.shape
    if isinstance(bins, DimensionSpec):
        bins = bins.choices
    bins = (bins,) * p if np.isscalar(bins) else tuple(bins)
    if len(bins) != p:
        raise SpecError(f"{len(bins)} bin counts for {p} features")
    layouts = np.empty((n, p), dtype=np.int64)
    for j, b in enumerate(bins):
        col = X[:, j]
        if np.unique(col).size < b:
            raise SpecError(f"feature {j} has fewer distinct values than its {b} bins")
        rank = rankdata(col, method="min") - 1
        layouts[:, j] = (rank * b) // n
    y = np.asarray(labels)
    if not np.isin(y, (-1, 0, 1)).all():
        raise SpecError("labels must be in {-1, +1} or {0, 1}")
    return LoggedDataset(DimensionSpec(bins), layouts, (y > 0).astype(np.int64))


def simulate_logged(model: SimulatorModel, n_rows: int, rng: np.random.Generator) -> LoggedDataset:
    """Uniformly logged plays against a known model."""
    spec = model.spec
    layouts = rng.integers(0, spec.choices, size=(n_rows, spec.dims))
    p = model.prob_table[tuple(layouts.T)]
    rewards = (rng.random(n_rows) < p).astype(np.int64)
    return LoggedDataset(spec, layouts, rewards)


def fourclass_like(n_rows: int = 863, rng: np.random.Generator | None = None):
    """Two numeric features with an interaction-driven binary label.

    A stand-in for the LIBSVM ``fourclass`` set: labels are ``+1`` on two
    opposite quadrant pairs of a warped grid, with 10% label noise. Returns
    ``(features, labels)``.
    """
    rng = np.random.default_rng(rng)
    X = rng.uniform(0, 1, size=(n_rows, 2))
    u = np.sin(2 * np.pi * X[:, 0]) + 0.5 * X[:, 1]
    v = np.cos(np.pi * X[:, 1]) - 0.3 * X[:, 0]
    y = np.where(u * v > 0, 1, -1)
    flip = rng.random(n_rows) < 0.1
    y[flip] = -y[flip]
    return X, y
