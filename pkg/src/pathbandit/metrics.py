"""Closed-loop evaluation metrics: average regret, convergence rate, best-arm rate."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .core import DimensionSpec
from .simulator import SimulatorModel

METRIC_HEADER = ("policy", "replication", "metric", "window_start", "window_end", "value")


class RewardRecord(NamedTuple):
    step: int
    layout: tuple[int, ...]
    reward: int


@dataclass
class RunHistory:
    """Played layouts and realized rewards, step ``t`` at row ``t - 1``."""

    spec: DimensionSpec
    layouts: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        self.layouts = np.asarray(self.layouts, dtype=np.int64).reshape(-1, self.spec.dims)
        self.rewards = np.asarray(self.rewards, dtype=np.int64)
        if len(self.layouts) != len(self.rewards):
            raise ValueError("layouts and rewards differ in length")
        if not np.isin(self.rewards, (0, 1)).all():
            raise ValueError("rewards must be binary")

    @classmethod
    def from_records(cls, spec: DimensionSpec, records: Iterable[RewardRecord]) -> "RunHistory":
        records = list(records)
        steps = [r.step for r in records]
        if steps != list(range(1, len(records) + 1)):
            raise ValueError("record steps must run 1, 2, ...")
        return cls(spec, [r.layout for r in records], [r.reward for r in records])

    def __len__(self):
        return len(self.rewards)

    @property
    def records(self) -> list[RewardRecord]:
        return [RewardRecord(t + 1, tuple(int(v) for v in a), int(x))
                for t, (a, x) in enumerate(zip(self.layouts, self.rewards))]

    @property
    def arm_indices(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(self.layouts.T), self.spec.choices)


@dataclass
class WindowSeries:
    """One rate per consecutive full window; window ``i`` covers steps
    ``i * window + 1`` through ``(i + 1) * window``."""

    window: int
    values: np.ndarray

    @property
    def bounds(self) -> list[tuple[int, int]]:
        return [(i * self.window + 1, (i + 1) * self.window) for i in range(len(self.values))]


def _windows(x: np.ndarray, window: int) -> np.ndarray:
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(x) // window
    return x[:n * window].reshape(n, window)


def average_regret(history: RunHistory, model: SimulatorModel) -> float:
    """Mean of ``p(A*) - X_t`` over the history, using realized rewards."""
    if len(history) == 0:
        raise ValueError("empty history")
    return float(model.best[1] - history.rewards.mean())


def expected_regret(history: RunHistory, model: SimulatorModel) -> float:
    """Mean of ``p(A*) - p(A_t)``: the noise-free counterpart of :func:`average_regret`."""
    if len(history) == 0:
        raise ValueError("empty history")
    p = model.prob_table.ravel()[history.arm_indices]
    return float(model.best[1] - p.mean())


def windowed_expected_regret(history: RunHistory, model: SimulatorModel,
                             window: int = 1000) -> WindowSeries:
    gap = model.best[1] - model.prob_table.ravel()[history.arm_indices]
    return WindowSeries(window, _windows(gap, window).mean(axis=1))


def convergence_rate(history: RunHistory, window: int = 1000) -> WindowSeries:
    """Share of each window taken by its most played layout."""
    blocks = _windows(history.arm_indices, window)
    values = np.empty(len(blocks))
    for i, block in enumerate(blocks):
        values[i] = np.unique(block, return_counts=True)[1].max() / window
    return WindowSeries(window, values)


def best_arm_rate(history: RunHistory, model: SimulatorModel, window: int = 1000) -> WindowSeries:
    best = model.spec.arm_index(model.best[0])
    return WindowSeries(window, _windows(history.arm_indices == best, window).mean(axis=1))


def metric_rows(policy: str, replication: int, history: RunHistory, model: SimulatorModel,
                window: int) -> list[tuple]:
    """Every metric for one run as rows matching :data:`METRIC_HEADER`.

    ``avg_regret`` and ``avg_expected_regret`` span the whole run; the
    ``cum_*`` rows trace the running averages at each window end, and the
    per-window rates cover one window each.
    """
    T = len(history)
    rows = [
        (policy, replication, "avg_regret", 1, T, average_regret(history, model)),
        (policy, replication, "avg_expected_regret", 1, T, expected_regret(history, model)),
    ]
    p_star = model.best[1]
    p = model.prob_table.ravel()[history.arm_indices]
    ends = np.arange(window, T + 1, window)
    cum_real = p_star - np.cumsum(history.rewards)[ends - 1] / ends
    cum_exp = p_star - np.cumsum(p)[ends - 1] / ends
    series = {
        "cum_avg_regret": cum_real,
        "cum_avg_expected_regret": cum_exp,
        "window_expected_regret": windowed_expected_regret(history, model, window).values,
        "convergence_rate": convergence_rate(history, window).values,
        "best_arm_rate": best_arm_rate(history, model, window).values,
    }
    for name, values in series.items():
        for i, v in enumerate(values):
            start = 1 if name.startswith("cum_") else i * window + 1
            rows.append((policy, replication, name, start, (i + 1) * window, float(v)))
    return rows


def format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(fp: IO[str], header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
