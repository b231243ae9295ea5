"""Seeded closed-loop experiments, parameter sweeps and OPE runs.

Every emitted number is a pure function of the resolved config: each
replication draws its simulator from ``derive_seed(seed, h, 0)`` and policy
``i`` (0-based position in the config) runs on ``derive_seed(seed, h, i + 1)``.
All policies in a replication face the same simulator model.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import ConfigError, DimensionSpec, Prior
from .metrics import METRIC_HEADER, RunHistory, metric_rows, write_csv
from .ope import (OPE_HEADER, LoggedDataset, james_stein, replay_evaluate,
                  replay_report_row)
from .policies import PolicyConfig, select_arm
from .simulator import SimulatorModel, default_controls, init_model

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
SWEEP_TAG = 0x5EED
SUMMARY_HEADER = ("policy", "metric", "window_start", "window_end", "mean", "stderr", "n")
SWEEP_HEADER = ("policy", "axis", "value", "metric", "mean", "stderr", "n")
SWEEP_AXES = ("alpha2", "N", "D")
BUILD_ID = f"pathbandit {__version__}"


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, replication: int, policy: int) -> int:
    """64-bit child seed: ``f(f(f(master) ^ replication) ^ policy)`` with ``f`` the
    SplitMix64 step. ``f`` is a bijection, so seeds differing in one word never collide.
    """
    x = _splitmix64(master & MASK64)
    x = _splitmix64(x ^ (replication & MASK64))
    return _splitmix64(x ^ (policy & MASK64))


@dataclass
class ExperimentConfig:
    """Closed-loop experiment settings; see the README for the JSON layout."""

    choices: tuple[int, ...]
    order: int = 2
    scale: float | None = None
    controls: tuple[float, ...] | None = None
    bias: float = 0.0
    policies: tuple[PolicyConfig, ...] = ()
    steps: int = 20_000
    replications: int = 20
    window: int = 1000
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        self.choices = tuple(int(c) for c in self.choices)
        self.policies = tuple(self.policies)
        if self.controls is not None:
            self.controls = tuple(float(a) for a in self.controls)
        self.validate()

    @property
    def spec(self) -> DimensionSpec:
        return DimensionSpec(self.choices)

    @property
    def resolved_controls(self) -> tuple[float, ...]:
        if self.controls is None:
            return tuple(default_controls(len(self.choices), self.order))
        return self.controls

    def validate(self) -> None:
        spec = self.spec
        if not 1 <= self.order <= spec.dims:
            raise ConfigError(f"simulator order {self.order} not in [1, {spec.dims}]")
        if self.scale is None or not self.scale > 0:
            raise ConfigError("simulator scale must be given and positive")
        if len(self.resolved_controls) != self.order:
            raise ConfigError(f"need {self.order} controls")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.window < 1 or self.steps < self.window:
            raise ConfigError("need steps >= window >= 1")
        if not self.policies:
            raise ConfigError("no policies configured")
        for p in self.policies:
            p.make_store(spec)
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate policies in {labels}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        try:
            choices = doc.pop("choices")
            dims = doc.pop("dims", None)
            if isinstance(choices, int):
                if dims is None:
                    raise ConfigError("'dims' is required when 'choices' is a single number")
                choices = (choices,) * dims
            sim = dict(doc.pop("simulator", {}))
            controls = sim.pop("controls", "default")
            searches = doc.pop("searches", 45)
            rounds = doc.pop("rounds", 10)
            prior = Prior(*doc.pop("prior", (1.0, 1.0)))
            policies = []
            for p in doc.pop("policies", []):
                if isinstance(p, str):
                    p = {"name": p}
                p = dict(p)
                name = p.pop("name")
                p.setdefault("searches", searches)
                p.setdefault("rounds", rounds)
                policies.append(PolicyConfig.from_name(name, prior=prior, **p))
            doc.pop("ope", None)
            return cls(choices=choices, order=sim.pop("order", 2), scale=sim.pop("scale", None),
                       controls=None if controls == "default" else controls,
                       bias=sim.pop("bias", 0.0), policies=policies, **doc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad config: {exc!r}") from exc

    def to_dict(self) -> dict:
        """Fully resolved config; ``from_dict(to_dict())`` reproduces the run."""
        return {
            "choices": list(self.choices),
            "simulator": {"order": self.order, "scale": self.scale,
                          "controls": list(self.resolved_controls), "bias": self.bias},
            "policies": [{"name": p.label, "searches": p.searches, "rounds": p.rounds}
                         for p in self.policies],
            "prior": [self.policies[0].prior.alpha0, self.policies[0].prior.beta0],
            "steps": self.steps,
            "replications": self.replications,
            "window": self.window,
            "seed": self.seed,
        }


def load_config(path) -> dict:
    with open(path) as fp:
        try:
            return json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def run_policy(policy: PolicyConfig, model: SimulatorModel, steps: int,
               rng: np.random.Generator) -> RunHistory:
    """Closed loop: select, draw the reward, back-propagate, ``steps`` times."""
    spec = model.spec
    store = policy.make_store(spec)
    probs = model.prob_table
    layouts = np.empty((steps, spec.dims), dtype=np.int64)
    rewards = np.empty(steps, dtype=np.int64)
    for t in range(steps):
        a = select_arm(policy, store, rng)
        x = int(rng.random() < probs[a])
        store.update(a, x)
        layouts[t] = a
        rewards[t] = x
    return RunHistory(spec, layouts, rewards)


def replication_model(config: ExperimentConfig, h: int) -> SimulatorModel:
    rng = np.random.default_rng(derive_seed(config.seed, h, 0))
    return init_model(config.spec, config.order, config.scale, config.resolved_controls,
                      rng, config.bias)


def run_replication(config: ExperimentConfig, h: int) -> dict[str, list[tuple]]:
    """Metric rows for every policy in replication ``h``."""
    model = replication_model(config, h)
    out = {}
    for i, policy in enumerate(config.policies):
        rng = np.random.default_rng(derive_seed(config.seed, h, i + 1))
        history = run_policy(policy, model, config.steps, rng)
        out[policy.label] = metric_rows(policy.label, h, history, model, config.window)
        log.info("replication %d %s: avg regret %.4f", h, policy.label, out[policy.label][0][-1])
    return out


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return float("nan")
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def summarize(rows: Sequence[tuple]) -> list[tuple]:
    """Replication mean and standard error (sample SD / sqrt(H)) per metric cell."""
    cells: dict[tuple, list[float]] = {}
    for policy, _, metric, start, end, value in rows:
        cells.setdefault((policy, metric, start, end), []).append(value)
    return [(*key, float(np.mean(v)), _stderr(np.array(v)), len(v)) for key, v in cells.items()]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[tuple]
    summary: list[tuple]
    manifest: dict = field(repr=False)

    def values(self, policy: str, metric: str, window_end: int | None = None) -> np.ndarray:
        """Per-replication values of one metric cell, ordered by replication."""
        return np.array([r[5] for r in self.rows if r[0] == policy and r[2] == metric
                         and (window_end is None or r[4] == window_end)])


def _parallel_map(fn, args, threads: int):
    if threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=threads)(delayed(fn)(*a) for a in args)


def run_experiment(config: ExperimentConfig, threads: int = 1, out=None) -> ExperimentResult:
    """Run every replication, then write ``metrics.csv``, ``summary.csv`` and
    ``manifest.json`` into ``out`` (or ``config.out``) when one is set."""
    out = out if out is not None else config.out
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
    reps = _parallel_map(run_replication, [(config, h) for h in range(config.replications)],
                         threads)
    rows = [row for p in config.policies for rep in reps for row in rep[p.label]]
    summary = summarize(rows)
    manifest = {
        "build": BUILD_ID,
        "config": config.to_dict(),
        "seeds": {
            str(h): {"model": derive_seed(config.seed, h, 0),
                     **{p.label: derive_seed(config.seed, h, i + 1)
                        for i, p in enumerate(config.policies)}}
            for h in range(config.replications)
        },
    }
    result = ExperimentResult(config, rows, summary, manifest)
    if out is not None:
        write_experiment(result, out)
    return result


def write_experiment(result: ExperimentResult, out) -> None:
    out = Path(out)
    with open(out / "metrics.csv", "w", newline="") as fp:
        write_csv(fp, METRIC_HEADER, result.rows)
    with open(out / "summary.csv", "w", newline="") as fp:
        write_csv(fp, SUMMARY_HEADER, result.summary)
    with open(out / "manifest.json", "w") as fp:
        json.dump(result.manifest, fp, indent=2, sort_keys=True)
        fp.write("\n")


def sweep_config(config: ExperimentConfig, axis: str, value, index: int) -> ExperimentConfig:
    """The config for one sweep point, with its own child seed."""
    seed = derive_seed(config.seed, index, SWEEP_TAG)
    if axis == "alpha2":
        controls = list(config.resolved_controls)
        if len(controls) < 2:
            raise ConfigError("alpha2 sweep needs simulator order >= 2")
        controls[1] = float(value)
        return replace(config, controls=tuple(controls), seed=seed, out=None)
    if axis == "N":
        return replace(config, choices=(int(value),) * len(config.choices), seed=seed, out=None)
    if axis == "D":
        return replace(config, choices=(config.choices[0],) * int(value), seed=seed, out=None)
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass
class SweepResult:
    axis: str
    values: list
    results: list[ExperimentResult]
    rows: list[tuple]


def run_sweep(config: ExperimentConfig, axis: str, values: Sequence, threads: int = 1,
              out=None) -> SweepResult:
    """One experiment per axis value; aggregates final average regret per policy.

    A D sweep keeps the configured controls unless they are the defaults, in
    which case each D gets its own default controls.
    """
    configs = [sweep_config(config, axis, v, i) for i, v in enumerate(values)]
    out = out if out is not None else config.out
    results = []
    for v, cfg in zip(values, configs):
        sub = None if out is None else Path(out) / f"{axis}={v}"
        results.append(run_experiment(cfg, threads=threads, out=sub))
    rows = []
    for p in config.policies:
        for v, res in zip(values, results):
            for metric in ("avg_regret", "avg_expected_regret"):
                x = res.values(p.label, metric)
                rows.append((p.label, axis, v, metric, float(x.mean()), _stderr(x), len(x)))
    if out is not None:
        out = Path(out)
        with open(out / "sweep.csv", "w", newline="") as fp:
            write_csv(fp, SWEEP_HEADER, rows)
        with open(out / "manifest.json", "w") as fp:
            json.dump({"build": BUILD_ID, "config": config.to_dict(), "axis": axis,
                       "values": list(values),
                       "child_seeds": [c.seed for c in configs]}, fp, indent=2, sort_keys=True)
            fp.write("\n")
    return SweepResult(axis, list(values), results, rows)


def run_ope(config: ExperimentConfig, dataset: LoggedDataset, steps: int, repetitions: int,
            threads: int = 1, out=None) -> list[tuple]:
    """Replay every configured policy ``repetitions`` times on ``dataset``."""
    arm_values = james_stein(dataset.arm_stats())
    jobs = [(p, i, r) for i, p in enumerate(config.policies) for r in range(repetitions)]

    def one(p, i, r):
        rng = np.random.default_rng(derive_seed(config.seed, r, i + 1))
        return replay_report_row(p.label, r, replay_evaluate(p, dataset, steps, rng), arm_values)

    rows = _parallel_map(one, jobs, threads)
    out = out if out is not None else config.out
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ope_report.csv", "w", newline="") as fp:
            write_csv(fp, OPE_HEADER, rows)
        with open(out / "manifest.json", "w") as fp:
            json.dump({"build": BUILD_ID, "config": config.to_dict(), "ope_steps": steps,
                       "repetitions": repetitions, "rows": len(dataset)},
                      fp, indent=2, sort_keys=True)
            fp.write("\n")
    return rows
