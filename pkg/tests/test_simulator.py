import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathbandit import (ConfigError, DimensionSpec, SimulatorModel, default_controls, draw_reward,
                        init_model, linear_predictor, success_prob, true_best)


def hand_model(scale=1.0, controls=(1.0, 1.0), bias=0.0):
    spec = DimensionSpec((2, 2))
    weights = {(0,): np.array([0.5, -0.25]), (1,): np.array([0.1, 0.3]),
               (0, 1): np.array([[0.2, -0.4], [1.0, 0.0]])}
    return SimulatorModel(spec, 2, scale, controls, weights, bias)


def test_default_controls():
    assert default_controls(3, 2) == pytest.approx([1 / 3, 1 / 3], abs=0)
    assert default_controls(4, 1) == [0.25]
    assert default_controls(5, 3) == pytest.approx([1 / 5, 1 / 10, 1 / 10], rel=1e-15)
    with pytest.raises(ConfigError):
        default_controls(2, 3)


def test_weight_count_and_determinism():
    spec = DimensionSpec.uniform(3, 10)
    a = init_model(spec, 2, 3.0, rng=np.random.default_rng(1))
    b = init_model(spec, 2, 3.0, rng=np.random.default_rng(1))
    assert a.n_weights == 330
    assert set(a.weights) == {(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)}
    for k in a.weights:
        assert np.array_equal(a.weights[k], b.weights[k])
    with pytest.raises(ConfigError):
        init_model(spec, 4, 3.0)


def test_weights_standard_normal():
    spec = DimensionSpec.uniform(3, 4)
    pooled = np.concatenate([
        np.concatenate([w.ravel() for w in init_model(spec, 2, 1.0, rng=s).weights.values()])
        for s in range(100)])
    assert abs(pooled.mean()) < 3 / math.sqrt(pooled.size)
    assert abs(pooled.std() - 1) < 4 / math.sqrt(2 * pooled.size)


def test_weight_draw_order():
    spec = DimensionSpec((2, 3))
    model = init_model(spec, 2, 1.0, rng=np.random.default_rng(5))
    flat = np.random.default_rng(5).standard_normal(2 + 3 + 6)
    assert np.array_equal(model.weights[(0,)], flat[:2])
    assert np.array_equal(model.weights[(1,)], flat[2:5])
    assert np.array_equal(model.weights[(0, 1)], flat[5:].reshape(2, 3))


def test_shape_validation():
    spec = DimensionSpec((2, 2))
    with pytest.raises(ConfigError):
        SimulatorModel(spec, 1, 1.0, (1.0,), {(0,): np.zeros(2)})
    with pytest.raises(ConfigError):
        SimulatorModel(spec, 1, 0.0, (1.0,), {(0,): np.zeros(2), (1,): np.zeros(2)})


def test_zero_weights():
    spec = DimensionSpec.uniform(2, 3)
    model = init_model(spec, 2, 2.0, rng=0)
    zero = SimulatorModel(spec, 2, 2.0, model.controls,
                          {k: np.zeros_like(w) for k, w in model.weights.items()})
    assert all(linear_predictor(zero, a) == 0 for a in spec.arms())
    assert success_prob(zero, (1, 1)) == 0.5
    assert true_best(zero)[0] == (0, 0)


def test_single_term():
    spec = DimensionSpec((3,))
    w = np.array([0.7, -1.2, 0.05])
    model = SimulatorModel(spec, 1, 1.0, (1.0,), {(0,): w})
    for v in range(3):
        assert linear_predictor(model, (v,)) == w[v]


# hand computation: eta = (mu1_0[a] + mu1_1[b] + mu2[a, b]) / 2 with controls (1, 1)
HAND_ETA = {(0, 0): (0.5 + 0.1 + 0.2) / 2, (0, 1): (0.5 + 0.3 - 0.4) / 2,
            (1, 0): (-0.25 + 0.1 + 1.0) / 2, (1, 1): (-0.25 + 0.3 + 0.0) / 2}
# independent normal CDF evaluations of HAND_ETA via math.erfc
HAND_P = {a: 0.5 * math.erfc(-e / math.sqrt(2)) for a, e in HAND_ETA.items()}


def test_hand_fixture():
    model = hand_model(scale=2.0)
    for a in HAND_ETA:
        assert linear_predictor(model, a) == pytest.approx(HAND_ETA[a], abs=1e-15)
        assert model.eta_table[a] == pytest.approx(HAND_ETA[a], abs=1e-15)
        assert success_prob(model, a) == pytest.approx(HAND_P[a], abs=1e-12)
    assert HAND_P[(1, 0)] == pytest.approx(0.66458166, abs=1e-8)
    assert true_best(model)[0] == (1, 0)


def test_probit_tails():
    spec = DimensionSpec((2,))
    m = SimulatorModel(spec, 1, 1.0, (1.0,), {(0,): np.array([10.0, 0.0])})
    assert success_prob(m, (0,)) > 0.9999


def test_draw_reward():
    spec = DimensionSpec((3,))
    m = SimulatorModel(spec, 1, 1.0, (1.0,), {(0,): np.array([50.0, -50.0, 0.0])})
    rng = np.random.default_rng(0)
    assert all(draw_reward(m, (0,), rng) == 1 for _ in range(500))
    assert all(draw_reward(m, (1,), rng) == 0 for _ in range(500))
    eta = -0.5244005127080407  # Phi^-1(0.3)
    m3 = SimulatorModel(spec, 1, 1.0, (1.0,), {(0,): np.array([eta, 0.0, 0.0])})
    assert success_prob(m3, (0,)) == pytest.approx(0.3, abs=1e-12)
    mean = np.mean([draw_reward(m3, (0,), rng) for _ in range(10_000)])
    assert abs(mean - 0.3) < 0.015


def test_true_best_single_dimension():
    m = SimulatorModel(DimensionSpec((2,)), 1, 1.0, (1.0,), {(0,): np.array([0.5, -0.5])})
    assert true_best(m) == ((0,), pytest.approx(0.6914624612740131))


def brute_best(model):
    best, best_p = None, -1.0
    spec = model.spec
    for layout in itertools.product(*(range(n) for n in spec.choices)):
        eta = model.bias
        for k in range(1, model.order + 1):
            for dims in itertools.combinations(range(spec.dims), k):
                eta += model.controls[k - 1] * model.weights[dims][tuple(layout[d] for d in dims)]
        p = 0.5 * math.erfc(-(eta / model.scale) / math.sqrt(2))
        if p > best_p:
            best, best_p = layout, p
    return best, best_p


def test_true_best_matches_enumeration():
    model = init_model(DimensionSpec.uniform(3, 10), 2, 3.0, rng=np.random.default_rng(42))
    layout, p = true_best(model)
    ref_layout, ref_p = brute_best(model)
    assert layout == ref_layout and p == pytest.approx(ref_p, abs=1e-12)


def test_json_round_trip_bit_exact():
    model = init_model(DimensionSpec((3, 4, 2)), 3, 1.7, rng=np.random.default_rng(3), bias=0.1)
    again = SimulatorModel.loads(model.dumps())
    assert again.controls == model.controls and again.scale == model.scale
    for k, w in model.weights.items():
        assert np.array_equal(again.weights[k], w)
    assert again.dumps() == model.dumps()
    assert list(model.to_dict()["weights"])[:4] == ["1", "2", "3", "1,2"]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1.01, 50))
def test_scale_and_link_properties(seed, c):
    spec = DimensionSpec((3, 3, 2))
    model = init_model(spec, 2, 2.0, rng=seed)
    wide = SimulatorModel(spec, 2, 2.0 * c, model.controls, model.weights)
    np.testing.assert_allclose(np.abs(wide.eta_table), np.abs(model.eta_table) / c, rtol=1e-12)
    assert wide.best[0] == model.best[0]
    eta, p = model.eta_table.ravel(), model.prob_table.ravel()
    i, j = np.triu_indices(len(eta), 1)
    assert np.array_equal(eta[i] > eta[j], p[i] > p[j])
    assert np.all((p >= 0) & (p <= 1))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_additive_without_interactions(seed):
    spec = DimensionSpec((4, 3, 5))
    model = init_model(spec, 2, 1.0, controls=(0.5, 0.0), rng=seed)
    assert true_best(model)[0] == tuple(int(np.argmax(model.weights[(d,)])) for d in range(3))
