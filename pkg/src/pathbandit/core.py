"""Arm-space types and the joint Beta-Bernoulli state store.

Every posterior in this package is attached to a *partial assignment*: an
unordered set of ``(dimension, choice)`` pairs. The store keeps one
success/failure tally per partial assignment for every dimension subset it is
asked to maintain, and a single played layout updates every consistent key.

Dimensions and choices are 0-based throughout the Python API. File formats
(snapshots, logged CSVs) use 1-based indices.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import IO, NamedTuple, Sequence

import numpy as np

DEFAULT_MAX_ARMS = 10**6
DEFAULT_MAX_TABLE = 5 * 10**6


class SpecError(ValueError):
    """A key or layout that does not fit the arm space."""


class ConfigError(ValueError):
    """An unsatisfiable configuration (orders, caps, parameters)."""


@dataclass(frozen=True)
class DimensionSpec:
    """The arm space: ``len(choices)`` dimensions with ``choices[d]`` options each.

    A single-choice dimension is permitted; it simply never varies.
    """

    choices: tuple[int, ...]
    max_arms: int = DEFAULT_MAX_ARMS

    def __post_init__(self):
        choices = tuple(int(c) for c in self.choices)
        object.__setattr__(self, "choices", choices)
        if len(choices) < 1:
            raise ConfigError("need at least one dimension")
        if any(c < 1 for c in choices):
            raise ConfigError(f"every dimension needs >= 1 choice, got {choices}")
        if self.n_arms > self.max_arms:
            raise ConfigError(
                f"{self.n_arms} arms exceeds the cap of {self.max_arms}"
            )

    @classmethod
    def uniform(cls, dims: int, choices: int, **kwargs) -> "DimensionSpec":
        return cls((choices,) * dims, **kwargs)

    @property
    def dims(self) -> int:
        return len(self.choices)

    @property
    def n_arms(self) -> int:
        return math.prod(self.choices)

    @property
    def full_mask(self) -> int:
        return (1 << self.dims) - 1

    def validate_layout(self, layout: Sequence[int]) -> tuple[int, ...]:
        layout = tuple(int(v) for v in layout)
        if len(layout) != self.dims:
            raise SpecError(f"layout {layout} has {len(layout)} entries, expected {self.dims}")
        for d, v in enumerate(layout):
            if not 0 <= v < self.choices[d]:
                raise SpecError(f"choice {v} out of range for dimension {d}")
        return layout

    def arms(self) -> Iterable[tuple[int, ...]]:
        """All layouts in lexicographic order."""
        return itertools.product(*(range(n) for n in self.choices))

    def arm_index(self, layout: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(layout), self.choices))

    def arm_layout(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(index, self.choices))


class PartialAssignment(frozenset):
    """Unordered set of ``(dimension, choice)`` pairs, no dimension repeated.

    Accepts an iterable of pairs or a ``{dimension: choice}`` mapping. Two
    assignments holding the same pairs are equal and hash alike regardless of
    construction order.
    """

    def __new__(cls, pairs=()):
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        items = frozenset((int(d), int(c)) for d, c in pairs)
        if len({d for d, _ in items}) != len(items):
            raise SpecError(f"dimension repeated in {sorted(items)}")
        return super().__new__(cls, items)

    @classmethod
    def from_layout(cls, layout: Sequence[int]) -> "PartialAssignment":
        return cls(enumerate(layout))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(sorted(d for d, _ in self))

    @property
    def mask(self) -> int:
        return sum(1 << d for d, _ in self)

    def as_dict(self) -> dict[int, int]:
        return dict(sorted(self))

    def __repr__(self):
        return f"PartialAssignment({sorted(self)})"


class BetaCounts(NamedTuple):
    alpha: int = 0
    beta: int = 0


@dataclass(frozen=True)
class Prior:
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise ConfigError(f"prior parameters must be positive, got {self}")


def popcount(mask: int) -> int:
    return bin(mask).count("1")


class StateStore:
    """Success/failure tallies for partial assignments, up to a given order.

    Parameters
    ----------
    spec : DimensionSpec
    max_order : int
        Largest subset size updated on every play. ``spec.dims`` keeps the full
        joint hierarchy, ``1`` keeps per-dimension marginals only.
    track_full : bool, default=True
        Also maintain full-layout keys even when ``max_order < spec.dims``.
    max_table : int
        Cap on the number of allocated cells.

    Notes
    -----
    Storage is one dense count table per maintained dimension subset, laid out
    back to back in a flat array so a batch of keys resolves to flat indices in
    one vectorized step. Only touched cells count as stored keys
    (:attr:`n_keys`); untouched cells read as ``(0, 0)``.
    """

    def __init__(self, spec: DimensionSpec, max_order: int, track_full: bool = True,
                 max_table: int = DEFAULT_MAX_TABLE):
        D = spec.dims
        if not 0 <= max_order <= D:
            raise ConfigError(f"max_order must lie in [0, {D}], got {max_order}")
        self.spec = spec
        self.max_order = int(max_order)
        self.track_full = bool(track_full)

        masks = [m for m in range(1 << D)
                 if popcount(m) <= max_order or (track_full and m == spec.full_mask)]
        sizes = [math.prod(spec.choices[d] for d in range(D) if m >> d & 1) for m in masks]
        total = sum(sizes)
        if total > max_table:
            raise ConfigError(f"store needs {total} cells, cap is {max_table}")

        self._masks = np.array(masks, dtype=np.int64)
        self._slot = np.full(1 << D, -1, dtype=np.int64)
        self._slot[self._masks] = np.arange(len(masks))
        self._offset = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        self._strides = np.zeros((len(masks), D), dtype=np.int64)
        for s, m in enumerate(masks):
            stride = 1
            for d in reversed(range(D)):
                if m >> d & 1:
                    self._strides[s, d] = stride
                    stride *= spec.choices[d]
        self._n_choices = np.array(spec.choices, dtype=np.int64)
        self.alpha = np.zeros(total, dtype=np.int64)
        self.beta = np.zeros(total, dtype=np.int64)
        self.n_updates = 0
        self.tables = (self.alpha, self.beta, self._slot, self._offset, self._strides,
                       self._n_choices)

    # -- key resolution -------------------------------------------------

    def covers(self, mask) -> bool:
        """Whether every dimension subset in ``mask`` is maintained."""
        return bool(np.all(self._slot[np.asarray(mask)] >= 0))

    def require(self, mask) -> None:
        if not self.covers(mask):
            raise ConfigError(
                f"store (max_order={self.max_order}, track_full={self.track_full}) "
                "does not maintain the requested key order"
            )

    def flat_index(self, masks, layouts) -> np.ndarray:
        """Flat cell index for keys given as subset bitmasks plus layout contents.

        ``layouts[..., d]`` is ignored for dimensions outside the mask, so any
        placeholder may sit there. Masks must be maintained.
        """
        slot = self._slot[masks]
        return self._offset[slot] + np.einsum("...d,...d->...", self._strides[slot], layouts)

    def _resolve(self, key) -> tuple[int, np.ndarray]:
        key = key if isinstance(key, PartialAssignment) else PartialAssignment(key)
        layout = np.zeros(self.spec.dims, dtype=np.int64)
        for d, v in key:
            if not 0 <= d < self.spec.dims:
                raise SpecError(f"dimension {d} out of range")
            if not 0 <= v < self.spec.choices[d]:
                raise SpecError(f"choice {v} out of range for dimension {d}")
            layout[d] = v
        return key.mask, layout

    # -- public operations ----------------------------------------------

    def counts(self, key) -> BetaCounts:
        """Tallies for ``key``; ``(0, 0)`` for unseen or unmaintained keys."""
        mask, layout = self._resolve(key)
        if self._slot[mask] < 0:
            return BetaCounts(0, 0)
        i = self.flat_index(mask, layout)
        return BetaCounts(int(self.alpha[i]), int(self.beta[i]))

    def sample_theta(self, key, prior: Prior, rng: np.random.Generator) -> float:
        a, b = self.counts(key)
        return float(rng.beta(a + prior.alpha0, b + prior.beta0))

    def update(self, layout: Sequence[int], reward: int) -> None:
        """Record one play: every maintained key consistent with ``layout``."""
        layout = self.spec.validate_layout(layout)
        if reward not in (0, 1):
            raise SpecError(f"reward must be 0 or 1, got {reward!r}")
        idx = self.flat_index(self._masks, np.asarray(layout, dtype=np.int64))
        if reward:
            self.alpha[idx] += 1
        else:
            self.beta[idx] += 1
        self.n_updates += 1

    def updated_keys(self, layout: Sequence[int]) -> list[PartialAssignment]:
        """The keys :meth:`update` touches for ``layout``."""
        return [PartialAssignment((d, layout[d]) for d in range(self.spec.dims) if m >> d & 1)
                for m in self._masks.tolist()]

    @property
    def n_keys(self) -> int:
        return int(np.count_nonzero(self.alpha + self.beta))

    def items(self) -> Iterable[tuple[PartialAssignment, BetaCounts]]:
        """Touched keys with their counts, ordered by subset then choices."""
        D = self.spec.dims
        for s, m in enumerate(self._masks.tolist()):
            dims = [d for d in range(D) if m >> d & 1]
            shape = tuple(self.spec.choices[d] for d in dims)
            size = math.prod(shape)
            lo = self._offset[s]
            a, b = self.alpha[lo:lo + size], self.beta[lo:lo + size]
            for j in np.flatnonzero(a + b):
                choices = np.unravel_index(j, shape) if dims else ()
                yield (PartialAssignment(zip(dims, (int(c) for c in choices))),
                       BetaCounts(int(a[j]), int(b[j])))

    def full_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Views of the full-layout counts, shaped like the arm grid."""
        self.require(self.spec.full_mask)
        lo = self._offset[self._slot[self.spec.full_mask]]
        n = self.spec.n_arms
        return (self.alpha[lo:lo + n].reshape(self.spec.choices),
                self.beta[lo:lo + n].reshape(self.spec.choices))

    # -- snapshots --------------------------------------------------------

    def dump(self, fp: IO[str]) -> None:
        """Write touched keys as ``dim:choice,...<TAB>alpha beta`` lines (1-based)."""
        fp.write(f"# choices={','.join(map(str, self.spec.choices))} "
                 f"max_order={self.max_order} track_full={int(self.track_full)}\n")
        for key, (a, b) in self.items():
            pairs = ",".join(f"{d + 1}:{c + 1}" for d, c in sorted(key))
            fp.write(f"{pairs}\t{a} {b}\n")

    @classmethod
    def load(cls, fp: IO[str]) -> "StateStore":
        header = fp.readline()
        if not header.startswith("#"):
            raise SpecError("snapshot is missing its header line")
        fields = dict(tok.split("=", 1) for tok in header[1:].split())
        spec = DimensionSpec(tuple(int(c) for c in fields["choices"].split(",")))
        store = cls(spec, int(fields["max_order"]), bool(int(fields["track_full"])))
        for lineno, line in enumerate(fp, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            pairs, _, ab = line.partition("\t")
            key = PartialAssignment(
                (int(d) - 1, int(c) - 1)
                for d, c in (p.split(":") for p in pairs.split(",") if p)
            )
            mask, layout = store._resolve(key)
            if store._slot[mask] < 0:
                raise SpecError(f"line {lineno}: key {sorted(key)} is not maintained")
            a, b = (int(x) for x in ab.split())
            i = store.flat_index(mask, layout)
            store.alpha[i], store.beta[i] = a, b
        store.n_updates = int(store.counts(()).alpha + store.counts(()).beta)
        return store


def store_counts(store: StateStore, key) -> BetaCounts:
    return store.counts(key)


def sample_theta(store: StateStore, key, prior: Prior, rng: np.random.Generator) -> float:
    return store.sample_theta(key, prior, rng)


def backpropagate(store: StateStore, layout: Sequence[int], reward: int) -> StateStore:
    store.update(layout, reward)
    return store
