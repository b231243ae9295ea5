from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathbandit import DimensionSpec, PolicyConfig, SpecError, init_model
from pathbandit.ope import (ArmStats, LoggedDataset, discretize_features, fourclass_like,
                            ingest_logged, james_stein, replay_evaluate, replay_report_row,
                            simulate_logged, write_logged)
from pathbandit.policies import fixed_arm


def js_oracle(successes, counts):
    # exact rational evaluation of the positive-part rule
    x = [Fraction(s, n) for s, n in zip(successes, counts)]
    k = len(x)
    xbar = sum(x) / k
    spread = sum((xi - xbar) ** 2 for xi in x)
    s2 = sum(xi * (1 - xi) / n for xi, n in zip(x, counts)) / k
    c = max(Fraction(0), 1 - (k - 3) * s2 / spread)
    return [float(xbar + c * (xi - xbar)) for xi in x], float(c)


def test_james_stein_k5_fixture():
    successes, counts = [2, 10, 7, 12, 15], [10, 20, 10, 40, 20]
    expected, c = js_oracle(successes, counts)
    assert c == pytest.approx(0.889439655172414, abs=1e-14)
    got = james_stein(ArmStats(np.array(successes), np.array(counts)))
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_james_stein_degenerate_cases():
    equal = ArmStats(np.array([3, 6, 9, 12]), np.array([10, 20, 30, 40]))
    np.testing.assert_array_equal(james_stein(equal), equal.means)
    two = ArmStats(np.array([1, 9]), np.array([10, 10]))
    np.testing.assert_array_equal(james_stein(two), [0.1, 0.9])


def test_james_stein_unplayed_arms():
    stats = ArmStats(np.array([1, 0, 5, 8, 2]), np.array([4, 0, 10, 10, 8]))
    with pytest.warns(UserWarning):
        out = james_stein(stats)
    assert np.isnan(out[1])
    expected, _ = js_oracle([1, 5, 8, 2], [4, 10, 10, 8])
    np.testing.assert_allclose(out[[0, 2, 3, 4]], expected, atol=1e-12)


def test_james_stein_full_shrinkage():
    # tiny spread relative to binomial noise gives c = 0: everything at the grand mean
    stats = ArmStats(np.array([5, 5, 5, 6]), np.array([10, 10, 10, 10]))
    np.testing.assert_allclose(james_stein(stats), [0.525] * 4, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 50)), min_size=4, max_size=30))
def test_james_stein_contracts(arms):
    counts = np.array([n for _, n in arms])
    successes = np.minimum(np.array([s for s, _ in arms]), counts)
    x = successes / counts
    out = james_stein(ArmStats(successes, counts))
    assert np.all((out >= 0) & (out <= 1))
    assert np.sum((out - x.mean()) ** 2) <= np.sum((x - x.mean()) ** 2) + 1e-15


def test_replay_match_count():
    spec = DimensionSpec((2, 2))
    rng = np.random.default_rng(0)
    data = LoggedDataset(spec, rng.integers(0, 2, size=(4000, 2)), rng.integers(0, 2, 4000))
    res = replay_evaluate(fixed_arm((1, 0)), data, 10**6, rng, max_rows=4000)
    assert res.rows_scanned == 4000 and res.cycles == 0
    assert abs(res.matched_steps - 1000) <= 3 * np.sqrt(4000 * 0.25 * 0.75)
    assert np.all(res.history.layouts == (1, 0))


def test_replay_all_rows_match():
    spec = DimensionSpec((3, 2))
    rewards = np.random.default_rng(1).integers(0, 2, 50)
    data = LoggedDataset(spec, np.tile([2, 1], (50, 1)), rewards)
    res = replay_evaluate(fixed_arm((2, 1)), data, 50, np.random.default_rng(0))
    assert res.matched_steps == 50 and res.rows_scanned == 50 and res.match_rate == 1.0
    np.testing.assert_array_equal(res.history.rewards, rewards)


def test_replay_single_arm_is_on_policy():
    spec = DimensionSpec((1,))
    rewards = np.random.default_rng(2).integers(0, 2, 30)
    data = LoggedDataset(spec, np.zeros((30, 1)), rewards)
    res = replay_evaluate(PolicyConfig.from_name("FlatTS"), data, 75, np.random.default_rng(0))
    np.testing.assert_array_equal(res.history.rewards, np.tile(rewards, 3)[:75])
    assert res.cycles == 2


def test_replay_is_deterministic():
    model = init_model(DimensionSpec((2, 3)), 2, 1.0, rng=np.random.default_rng(4))
    data = simulate_logged(model, 600, np.random.default_rng(5))
    policy = PolicyConfig.from_name("PPF2", searches=5)
    a = replay_evaluate(policy, data, 100, np.random.default_rng(9))
    b = replay_evaluate(policy, data, 100, np.random.default_rng(9))
    np.testing.assert_array_equal(a.history.layouts, b.history.layouts)
    assert a.rows_scanned == b.rows_scanned


def test_report_row():
    spec = DimensionSpec((2,))
    data = LoggedDataset(spec, [[0], [1], [0], [1]], [1, 0, 1, 1])
    res = replay_evaluate(fixed_arm((1,)), data, 2, np.random.default_rng(0))
    values = np.array([0.8, 0.4])
    label, rep, matched, value, regret = replay_report_row("Fixed", 7, res, values)
    assert (label, rep, matched, value) == ("Fixed", 7, 2, 0.5)
    assert regret == pytest.approx(0.4)


def test_ingest_round_trip(tmp_path):
    model = init_model(DimensionSpec((3, 4)), 2, 1.0, rng=np.random.default_rng(0))
    data = simulate_logged(model, 1000, np.random.default_rng(1))
    path = tmp_path / "logged.csv"
    write_logged(path, data)
    again = ingest_logged(path, model.spec)
    np.testing.assert_array_equal(again.layouts, data.layouts)
    np.testing.assert_array_equal(again.rewards, data.rewards)
    assert ingest_logged(path).spec.choices == (3, 4)


def test_ingest_small_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("dim_1,dim_2,reward\n1,2,1\n2,2,0\n1,1,1\n")
    data = ingest_logged(path, DimensionSpec((2, 2)))
    assert len(data) == 3
    assert data.layouts.tolist() == [[0, 1], [1, 1], [0, 0]]


@pytest.mark.parametrize("text,match", [
    ("dim_1,dim_2,reward\n1,2,1\n1,1,2\n", ":3: reward 2"),
    ("dim_1,dim_2,reward\n1,3,1\n", ":2: choice 3"),
    ("dim_1,dim_2,reward\n0,1,1\n", ":2: choice 0"),
    ("dim_1,dim_2,reward\n1,x,1\n", ":2: non-integer"),
    ("dim_1,dim_2,reward\n1,1\n", ":2: expected 3 fields"),
    ("a,b,reward\n1,1,1\n", "bad header"),
])
def test_ingest_errors(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(SpecError, match=match):
        ingest_logged(path, DimensionSpec((2, 2)))


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_logged(tmp_path / "nope.csv")


def test_discretize_small():
    data = discretize_features([[4.0], [1.0], [3.0], [2.0]], [1, -1, 1, -1], 4)
    assert data.layouts.ravel().tolist() == [3, 0, 2, 1]
    assert data.rewards.tolist() == [1, 0, 1, 0]


def test_discretize_fourclass_shape():
    X, y = fourclass_like(863, np.random.default_rng(0))
    data = discretize_features(X, y, (4, 4))
    assert data.spec.choices == (4, 4) and len(data) == 863
    for j in range(2):
        sizes = np.bincount(data.layouts[:, j], minlength=4)
        assert sizes.max() - sizes.min() <= 1


def test_discretize_rejects_constant_feature():
    with pytest.raises(SpecError):
        discretize_features(np.column_stack([np.arange(10.0), np.ones(10)]), np.ones(10), 4)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(8, 400), b=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_discretize_equal_frequency(n, b, seed):
    x = np.random.default_rng(seed).permutation(n).astype(float)
    data = discretize_features(x[:, None], np.ones(n), b)
    sizes = np.bincount(data.layouts[:, 0], minlength=b)
    assert sizes.max() - sizes.min() <= 1
    order = np.argsort(x)
    assert np.all(np.diff(data.layouts[order, 0]) >= 0)
