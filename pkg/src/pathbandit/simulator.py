"""Bernoulli layout simulator with m-way interaction weights under a probit link."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import ConfigError, DimensionSpec


def default_controls(dims: int, order: int) -> list[float]:
    """``alpha_k = k! / (D (D-1) ... (D-k+1))`` for ``k = 1..order``."""
    if not 1 <= order <= dims:
        raise ConfigError(f"order must lie in [1, {dims}], got {order}")
    return [math.factorial(k) / math.perm(dims, k) for k in range(1, order + 1)]


@dataclass(frozen=True)
class SimulatorModel:
    """Ground-truth reward model.

    ``weights`` maps each sorted dimension subset of size ``1..order`` to an
    array over that subset's choice combinations (axes in dimension order).
    The success probability of a layout is ``Phi(eta)`` with

        eta = (bias + sum_k controls[k-1] * sum_{|S|=k} weights[S][layout[S]]) / scale
    """

    spec: DimensionSpec
    order: int
    scale: float
    controls: tuple[float, ...]
    weights: dict[tuple[int, ...], np.ndarray] = field(repr=False)
    bias: float = 0.0

    def __post_init__(self):
        D = self.spec.dims
        if not 1 <= self.order <= D:
            raise ConfigError(f"order must lie in [1, {D}], got {self.order}")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if len(self.controls) != self.order:
            raise ConfigError(f"need {self.order} controls, got {len(self.controls)}")
        object.__setattr__(self, "controls", tuple(float(a) for a in self.controls))
        for k in range(1, self.order + 1):
            for dims in itertools.combinations(range(D), k):
                w = self.weights.get(dims)
                shape = tuple(self.spec.choices[d] for d in dims)
                if w is None or np.shape(w) != shape:
                    raise ConfigError(f"weights for subset {dims} must have shape {shape}")

    @property
    def n_weights(self) -> int:
        return sum(w.size for w in self.weights.values())

    @cached_property
    def eta_table(self) -> np.ndarray:
        """Linear predictor for every layout, shaped like the arm grid."""
        D = self.spec.dims
        eta = np.full(self.spec.choices, float(self.bias))
        for dims, w in self.weights.items():
            shape = [1] * D
            for d in dims:
                shape[d] = self.spec.choices[d]
            eta = eta + self.controls[len(dims) - 1] * np.reshape(w, shape)
        return eta / self.scale

    @cached_property
    def prob_table(self) -> np.ndarray:
        return ndtr(self.eta_table)

    @cached_property
    def best(self) -> tuple[tuple[int, ...], float]:
        i = int(np.argmax(self.eta_table))
        return self.spec.arm_layout(i), float(self.prob_table.flat[i])

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def exact(x):
            return float(format(float(x), ".17g"))

        return {
            "choices": list(self.spec.choices),
            "order": self.order,
            "scale": exact(self.scale),
            "controls": [exact(a) for a in self.controls],
            "bias": exact(self.bias),
            "weights": {
                ",".join(str(d + 1) for d in dims): [exact(x) for x in np.ravel(w)]
                for dims, w in sorted(self.weights.items(), key=lambda kv: (len(kv[0]), kv[0]))
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulatorModel":
        spec = DimensionSpec(tuple(doc["choices"]))
        weights = {}
        for key, values in doc["weights"].items():
            dims = tuple(int(d) - 1 for d in key.split(","))
            shape = tuple(spec.choices[d] for d in dims)
            weights[dims] = np.array(values, dtype=float).reshape(shape)
        return cls(spec, int(doc["order"]), float(doc["scale"]), tuple(doc["controls"]),
                   weights, float(doc.get("bias", 0.0)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "SimulatorModel":
        return cls.from_dict(json.loads(text))


def init_model(spec: DimensionSpec, order: int, scale: float, controls=None,
               rng: np.random.Generator | None = None, bias: float = 0.0) -> SimulatorModel:
    """Draw every interaction weight i.i.d. standard normal.

    Weights are drawn subset by subset, sizes ascending and subsets in
    lexicographic order, each as one C-ordered block. ``controls=None`` uses
    :func:`default_controls`.
    """
    if not 1 <= order <= spec.dims:
        raise ConfigError(f"order must lie in [1, {spec.dims}], got {order}")
    if controls is None:
        controls = default_controls(spec.dims, order)
    rng = np.random.default_rng(rng)
    weights = {}
    for k in range(1, order + 1):
        for dims in itertools.combinations(range(spec.dims), k):
            weights[dims] = rng.standard_normal(tuple(spec.choices[d] for d in dims))
    return SimulatorModel(spec, order, scale, tuple(controls), weights, bias)


def linear_predictor(model: SimulatorModel, layout: Sequence[int]) -> float:
    layout = model.spec.validate_layout(layout)
    total = model.bias
    for dims, w in model.weights.items():
        total += model.controls[len(dims) - 1] * w[tuple(layout[d] for d in dims)]
    return float(total / model.scale)


def success_prob(model: SimulatorModel, layout: Sequence[int]) -> float:
    return float(ndtr(linear_predictor(model, layout)))


def draw_reward(model: SimulatorModel, layout: Sequence[int], rng: np.random.Generator) -> int:
    """One Bernoulli reward; consumes exactly one uniform from ``rng``."""
    p = model.prob_table[tuple(model.spec.validate_layout(layout))]
    return int(rng.random() < p)


def true_best(model: SimulatorModel) -> tuple[tuple[int, ...], float]:
    """Best layout by exhaustive search, lexicographically smallest on ties."""
    return model.best
