import numpy as np
import pytest
from sklearn.base import clone

from pathbandit import PathPlanningBandit


def test_params_round_trip():
    est = PathPlanningBandit(choices=(3, 4), policy="FPF", searches=5, random_state=0)
    params = est.get_params()
    assert params["policy"] == "FPF" and params["searches"] == 5
    assert clone(est).get_params() == params
    est.set_params(policy="DS")
    assert est.policy == "DS"


def test_fit_predict_posterior_mean():
    X = [[0, 1], [0, 1], [2, 2], [0, 1]]
    y = [1, 1, 0, 0]
    est = PathPlanningBandit(choices=(3, 3), random_state=0).fit(X, y)
    np.testing.assert_allclose(est.predict([[0, 1], [2, 2], [1, 1]]), [3 / 5, 1 / 3, 1 / 2])
    est.partial_fit([[1, 1]], [1])
    assert est.predict([[1, 1]])[0] == pytest.approx(2 / 3)


def test_select_arm_reproducible():
    X, y = [[0, 0], [1, 1]], [1, 0]
    a = PathPlanningBandit(choices=(3, 3), random_state=4).fit(X, y)
    b = PathPlanningBandit(choices=(3, 3), random_state=4).fit(X, y)
    assert [a.select_arm() for _ in range(10)] == [b.select_arm() for _ in range(10)]


def test_closed_loop_learns_best_arm():
    rates = np.array([[0.1, 0.2], [0.2, 0.8]])
    est = PathPlanningBandit(choices=(2, 2), policy="PPF2", searches=5, random_state=1)
    rng = np.random.default_rng(0)
    plays = []
    for _ in range(600):
        arm = est.select_arm()
        est.partial_fit([arm], [int(rng.random() < rates[arm])])
        plays.append(arm)
    assert plays[-200:].count((1, 1)) >= 180


def test_input_validation():
    est = PathPlanningBandit(choices=(2, 2))
    with pytest.raises(ValueError):
        est.fit([[0, 0, 0]], [1])
    with pytest.raises(ValueError):
        est.fit([[0, 0]], [2])
    with pytest.raises(ValueError):
        est.fit([[0, 0]], [1, 0])
    est.fit([[0, 0]], [1])
    with pytest.raises(ValueError):
        est.predict([[0, 2]])
