"""Arm selection: Thompson-sampling path planners and the flat baselines.

Each planner builds one candidate layout by optimizing dimensions one at a
time with Thompson sampling over the store's joint posteriors. The loops run
compiled (see ``_kernels``) but draw from the caller's generator, so a
``select_arm`` with ``S`` searches consumes the stream exactly like ``S``
planner calls each followed by one arbitration draw.

Stream order inside a planner: the dimension permutation (FPF, PPF) or the
random start layout (DS variants) comes first; DS variants then pick each
round's dimension right before that round's Beta draws. Beta draws run over
choices in ascending order, and for boosted TS over ascending conditioning
subsets within each choice.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .core import ConfigError, PartialAssignment, Prior, SpecError, StateStore

VARIANTS = ("FPF", "PPF", "DS", "BoostedDS", "FlatTS", "DMabs")


class DrawCounter:
    """Instrumentation hook tallying Beta draws."""

    def __init__(self):
        self.draws = 0

    def __call__(self, n: int) -> None:
        self.draws += int(n)

    def reset(self) -> int:
        n, self.draws = self.draws, 0
        return n


@dataclass(frozen=True)
class PolicyConfig:
    """One arm-selection policy.

    ``order`` is the interaction order for PPF and BoostedDS (``None`` means 2);
    ``rounds`` applies to the DS variants only.
    """

    variant: str
    searches: int = 45
    rounds: int = 10
    order: int | None = None
    prior: Prior = field(default_factory=Prior)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.searches < 1:
            raise ConfigError("searches must be >= 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.variant in ("PPF", "BoostedDS"):
            if self.order is None:
                object.__setattr__(self, "order", 2)
            if self.order < 1:
                raise ConfigError("order must be >= 1")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "PolicyConfig":
        """Parse labels such as ``FPF``, ``PPF2``, ``Boosted-DS2``, ``FlatTS``."""
        m = re.fullmatch(r"(FPF|PPF|DS|Boosted-?DS|FlatTS|NDMAB|DMabs|D-MABs)(\d*)", name)
        if not m:
            raise ConfigError(f"cannot parse policy name {name!r}")
        base, digits = m.groups()
        base = {"Boosted-DS": "BoostedDS", "NDMAB": "FlatTS", "D-MABs": "DMabs"}.get(base, base)
        if digits:
            if base not in ("PPF", "BoostedDS"):
                raise ConfigError(f"{base} takes no order suffix")
            kwargs["order"] = int(digits)
        return cls(base, **kwargs)

    @property
    def label(self) -> str:
        if self.variant == "PPF":
            return f"PPF{self.order}"
        if self.variant == "BoostedDS":
            return f"Boosted-DS{self.order}"
        return self.variant

    def store_order(self, dims: int) -> int:
        """``max_order`` the variant needs from its store."""
        if self.variant in ("FPF", "DS"):
            return dims
        if self.variant in ("PPF", "BoostedDS"):
            if self.order > dims:
                raise ConfigError(f"{self.label} needs order <= D={dims}")
            return self.order
        if self.variant == "DMabs":
            return 1
        return 0

    def make_store(self, spec) -> StateStore:
        return StateStore(spec, self.store_order(spec.dims), track_full=True)


def _count(counter, n):
    if counter is not None:
        counter(n)


def _fixed_from(store: StateStore, target_dim: int, fixed) -> tuple[int, np.ndarray]:
    spec = store.spec
    key = fixed if isinstance(fixed, PartialAssignment) else PartialAssignment(fixed)
    if not 0 <= target_dim < spec.dims:
        raise SpecError(f"target dimension {target_dim} out of range")
    layout = np.zeros(spec.dims, dtype=np.int64)
    for d, v in key:
        if not (0 <= d < spec.dims and 0 <= v < spec.choices[d]):
            raise SpecError(f"pair {(d, v)} out of range")
        layout[d] = v
    if key.mask >> target_dim & 1:
        raise SpecError(f"target dimension {target_dim} is already fixed")
    return key.mask, layout


def ts_optimize(store: StateStore, target_dim: int, fixed, prior: Prior,
                rng: np.random.Generator, counter=None) -> int:
    """Thompson-sample the best choice for ``target_dim`` given the ``fixed`` pairs.

    One draw per choice from the key ``fixed | {(target_dim, v)}``; ties go
    to the lowest choice.
    """
    mask, layout = _fixed_from(store, target_dim, fixed)
    store.require(mask | 1 << target_dim)
    v, n = _kernels.ts_choice(store.tables, target_dim, mask, layout,
                              prior.alpha0, prior.beta0, rng)
    _count(counter, n)
    return int(v)


def bst_ts_optimize(store: StateStore, target_dim: int, fixed, order: int, prior: Prior,
                    rng: np.random.Generator, counter=None) -> int:
    """Boosted TS: score each choice by summing low-order posterior draws.

    The score for choice ``v`` is a draw from ``{(target_dim, v)}`` plus one
    draw from ``{(target_dim, v)} | F`` for each subset ``F`` of ``fixed``
    with ``1 <= |F| <= order - 1``.
    """
    if order < 1:
        raise ConfigError("order must be >= 1")
    mask, layout = _fixed_from(store, target_dim, fixed)
    store.require(_kernels.submasks(mask, order - 1) | 1 << target_dim)
    v, n = _kernels.bst_choice(store.tables, target_dim, mask, layout, order,
                               prior.alpha0, prior.beta0, rng)
    _count(counter, n)
    return int(v)


def _require_order(store: StateStore, order: int, full: bool = False) -> None:
    if store.max_order < order or (full and not store.covers(store.spec.full_mask)):
        raise ConfigError(
            f"planner needs keys up to order {order}{' and full layouts' if full else ''}; "
            f"store has max_order={store.max_order}, track_full={store.track_full}"
        )


def plan_fpf(store: StateStore, prior: Prior, rng: np.random.Generator,
             counter=None) -> tuple[int, ...]:
    """Full path finding: TS along a random dimension order, conditioning on all earlier picks."""
    _require_order(store, store.spec.dims)
    layout = np.zeros(store.spec.dims, dtype=np.int64)
    _count(counter, _kernels.plan_fpf(store.tables, layout, prior.alpha0, prior.beta0, rng))
    return _as_layout(layout)


def plan_ppf(store: StateStore, order: int, prior: Prior, rng: np.random.Generator,
             counter=None) -> tuple[int, ...]:
    """Partial path finding of the given order.

    Fixes ``order - 1`` random dimensions sequentially, then optimizes every
    remaining dimension independently given those pairs.
    """
    if not 1 <= order <= store.spec.dims:
        raise ConfigError(f"PPF order must lie in [1, {store.spec.dims}], got {order}")
    _require_order(store, order)
    layout = np.zeros(store.spec.dims, dtype=np.int64)
    _count(counter, _kernels.plan_ppf(store.tables, layout, order, prior.alpha0,
                                      prior.beta0, rng))
    return _as_layout(layout)


def _plan_ds(store, rounds, order, prior, rng, counter, start, dim_sequence):
    spec = store.spec
    if order:
        _require_order(store, min(order, spec.dims))
    else:
        _require_order(store, 0, full=True)
    if start is None:
        layout = np.zeros(spec.dims, dtype=np.int64)
    else:
        layout = np.array(spec.validate_layout(start), dtype=np.int64)
    if dim_sequence is None:
        seq = np.empty(0, dtype=np.int64)
    else:
        seq = np.asarray(dim_sequence, dtype=np.int64)
        if len(seq) != rounds or np.any((seq < 0) | (seq >= spec.dims)):
            raise SpecError("dim_sequence needs one valid dimension per round")
    n = _kernels.plan_ds(store.tables, layout, rounds, order, prior.alpha0, prior.beta0,
                         rng, start is None, seq)
    _count(counter, n)
    return _as_layout(layout)


def plan_ds(store: StateStore, rounds: int, prior: Prior, rng: np.random.Generator,
            counter=None, *, start=None, dim_sequence=None) -> tuple[int, ...]:
    """Destination shift: ``rounds`` TS re-optimizations of random single dimensions.

    Each round conditions on the full current layout minus the target. ``start``
    and ``dim_sequence`` override the random start and the per-round picks.
    """
    return _plan_ds(store, rounds, 0, prior, rng, counter, start, dim_sequence)


def plan_boosted_ds(store: StateStore, rounds: int, order: int, prior: Prior,
                    rng: np.random.Generator, counter=None, *, start=None,
                    dim_sequence=None) -> tuple[int, ...]:
    """Destination shift scored with boosted TS of the given order."""
    if order < 1:
        raise ConfigError("order must be >= 1")
    return _plan_ds(store, rounds, order, prior, rng, counter, start, dim_sequence)


def _as_layout(row) -> tuple[int, ...]:
    return tuple(int(v) for v in row)


def flat_ts_select(store: StateStore, prior: Prior, rng: np.random.Generator,
                   counter=None) -> tuple[int, ...]:
    """Plain Thompson sampling over every full layout (lexicographic ties)."""
    spec = store.spec
    if spec.n_arms > spec.max_arms:
        raise ConfigError("arm count exceeds cap")
    store.require(spec.full_mask)
    lo = int(store._offset[store._slot[spec.full_mask]])
    j = _kernels.flat_select(store.tables, lo, spec.n_arms, prior.alpha0, prior.beta0, rng)
    _count(counter, spec.n_arms)
    return spec.arm_layout(int(j))


_KIND = {"FPF": _kernels.FPF, "PPF": _kernels.PPF, "DS": _kernels.DS,
         "BoostedDS": _kernels.BOOSTED_DS}


def select_arm(policy: PolicyConfig, store: StateStore, rng: np.random.Generator,
               counter=None) -> tuple[int, ...]:
    """Pick the next layout to play.

    Runs ``policy.searches`` planning searches, draws one sample from each
    candidate's full-layout posterior and plays the best candidate. The two
    baselines skip this arbitration: FlatTS samples every layout directly and
    DMabs plays a single PPF1 plan (independent TS per dimension).
    """
    if policy.variant == "FlatTS":
        return flat_ts_select(store, policy.prior, rng, counter)
    if policy.variant == "DMabs":
        return plan_ppf(store, 1, policy.prior, rng, counter)
    spec = store.spec
    need = policy.store_order(spec.dims)
    if policy.variant == "DS":
        need = 0
    _require_order(store, need, full=True)
    order = policy.order or 0
    out = np.zeros(spec.dims, dtype=np.int64)
    n = _kernels.select(_KIND[policy.variant], store.tables, spec.dims, policy.searches,
                        order, policy.rounds, policy.prior.alpha0, policy.prior.beta0, rng, out)
    _count(counter, n)
    return _as_layout(out)


def fixed_arm(layout: Sequence[int]):
    """A policy that always proposes ``layout``."""
    layout = tuple(int(v) for v in layout)

    def choose(store, rng):
        return layout
    choose.label = "Fixed" + "-".join(str(v) for v in layout)
    return choose
