"""Compiled planning loops.

All kernels read the store through ``tables = (alpha, beta, slot, offset,
strides, n_choices)`` (see :class:`pathbandit.core.StateStore`) and draw from
the caller's ``numpy.random.Generator``; numba consumes the generator's bit
stream exactly as numpy would. Key coverage is checked by the Python callers.
Every kernel returns the number of Beta draws it made.
"""
import numpy as np
from numba import njit

CACHE = True


@njit(cache=CACHE)
def key_index(tables, mask, layout):
    slot, offset, strides = tables[2], tables[3], tables[4]
    s = slot[mask]
    i = offset[s]
    for d in range(layout.shape[0]):
        if (mask >> d) & 1:
            i += strides[s, d] * layout[d]
    return i


@njit(cache=CACHE)
def draw(tables, i, a0, b0, rng):
    return rng.beta(tables[0][i] + a0, tables[1][i] + b0)


@njit(cache=CACHE)
def ts_choice(tables, target, mask, layout, a0, b0, rng):
    """Argmax over one posterior draw per choice of ``target`` (lowest index on ties)."""
    key = mask | (1 << target)
    s = tables[2][key]
    base = tables[3][s]
    for d in range(layout.shape[0]):
        if (mask >> d) & 1:
            base += tables[4][s, d] * layout[d]
    step = tables[4][s, target]
    n = tables[5][target]
    best = 0
    best_theta = -1.0
    for v in range(n):
        theta = draw(tables, base + step * v, a0, b0, rng)
        if theta > best_theta:
            best_theta = theta
            best = v
    return best, n


@njit(cache=CACHE)
def submasks(mask, max_size):
    """Submasks of ``mask`` with at most ``max_size`` bits, ascending."""
    out = np.empty(mask + 1, np.int64)
    k = 0
    sub = 0
    while True:
        bits = 0
        x = sub
        while x:
            x &= x - 1
            bits += 1
        if bits <= max_size:
            out[k] = sub
            k += 1
        if sub == mask:
            break
        sub = (sub - mask) & mask
    return out[:k]


@njit(cache=CACHE)
def bst_choice(tables, target, mask, layout, order, a0, b0, rng):
    """Boosted TS: per choice, sum draws from ``{target} | F`` over ``F`` in
    the ``<= order - 1``-subsets of ``mask`` (empty set included)."""
    subs = submasks(mask, order - 1)
    J = subs.shape[0]
    bases = np.empty(J, np.int64)
    steps = np.empty(J, np.int64)
    for j in range(J):
        key = subs[j] | (1 << target)
        s = tables[2][key]
        b = tables[3][s]
        for d in range(layout.shape[0]):
            if (subs[j] >> d) & 1:
                b += tables[4][s, d] * layout[d]
        bases[j] = b
        steps[j] = tables[4][s, target]
    n = tables[5][target]
    best = 0
    best_score = -1.0
    for v in range(n):
        score = 0.0
        for j in range(J):
            score += draw(tables, bases[j] + steps[j] * v, a0, b0, rng)
        if score > best_score:
            best_score = score
            best = v
    return best, n * J


@njit(cache=CACHE)
def plan_fpf(tables, layout, a0, b0, rng):
    D = layout.shape[0]
    perm = rng.permutation(D)
    mask = 0
    draws = 0
    for i in range(D):
        t = perm[i]
        v, k = ts_choice(tables, t, mask, layout, a0, b0, rng)
        layout[t] = v
        mask |= 1 << t
        draws += k
    return draws


@njit(cache=CACHE)
def plan_ppf(tables, layout, order, a0, b0, rng):
    D = layout.shape[0]
    perm = rng.permutation(D)
    mask = 0
    draws = 0
    for i in range(order - 1):
        t = perm[i]
        v, k = ts_choice(tables, t, mask, layout, a0, b0, rng)
        layout[t] = v
        mask |= 1 << t
        draws += k
    # each remaining dimension conditions only on the sequential prefix
    for i in range(order - 1, D):
        t = perm[i]
        v, k = ts_choice(tables, t, mask, layout, a0, b0, rng)
        layout[t] = v
        draws += k
    return draws


@njit(cache=CACHE)
def plan_ds(tables, layout, rounds, order, a0, b0, rng, randomize_start, dim_sequence):
    """Hill climbing; ``order == 0`` uses plain TS, otherwise boosted TS.

    ``randomize_start`` draws the start layout; otherwise ``layout`` is the
    start. A non-empty ``dim_sequence`` replaces the random dimension picks.
    """
    D = layout.shape[0]
    n_choices = tables[5]
    if randomize_start:
        for d in range(D):
            layout[d] = rng.integers(0, n_choices[d])
    full = (1 << D) - 1
    draws = 0
    for r in range(rounds):
        if dim_sequence.shape[0] > 0:
            t = dim_sequence[r]
        else:
            t = rng.integers(0, D)
        fixed = full ^ (1 << t)
        if order == 0:
            v, k = ts_choice(tables, t, fixed, layout, a0, b0, rng)
        else:
            v, k = bst_choice(tables, t, fixed, layout, order, a0, b0, rng)
        layout[t] = v
        draws += k
    return draws


FPF, PPF, DS, BOOSTED_DS = 0, 1, 2, 3


@njit(cache=CACHE)
def plan(kind, tables, layout, order, rounds, a0, b0, rng):
    if kind == FPF:
        return plan_fpf(tables, layout, a0, b0, rng)
    if kind == PPF:
        return plan_ppf(tables, layout, order, a0, b0, rng)
    no_sequence = np.empty(0, np.int64)
    if kind == DS:
        return plan_ds(tables, layout, rounds, 0, a0, b0, rng, True, no_sequence)
    return plan_ds(tables, layout, rounds, order, a0, b0, rng, True, no_sequence)


@njit(cache=CACHE)
def select(kind, tables, n_dims, searches, order, rounds, a0, b0, rng, out):
    """Plan ``searches`` candidates, draw each from its full-layout posterior,
    keep the first maximum. Writes the winner into ``out``."""
    full = (1 << n_dims) - 1
    cand = np.zeros(n_dims, np.int64)
    best_theta = -1.0
    draws = 0
    for s in range(searches):
        draws += plan(kind, tables, cand, order, rounds, a0, b0, rng)
        theta = draw(tables, key_index(tables, full, cand), a0, b0, rng)
        draws += 1
        if theta > best_theta:
            best_theta = theta
            out[:] = cand
    return draws


@njit(cache=CACHE)
def flat_select(tables, lo, n_arms, a0, b0, rng):
    """Index of the best full layout among ``n_arms`` cells starting at ``lo``."""
    best = 0
    best_theta = -1.0
    for j in range(n_arms):
        theta = draw(tables, lo + j, a0, b0, rng)
        if theta > best_theta:
            best_theta = theta
            best = j
    return best
