"""scikit-learn style wrapper around the path-planning bandit."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .core import DimensionSpec, Prior
from .policies import PolicyConfig, select_arm


class PathPlanningBandit(BaseEstimator):
    """Multivariate Bernoulli bandit selecting layouts by TS path planning.

    Layouts are rows of non-negative integer codes, one column per dimension.
    ``fit`` rebuilds the posterior from a logged history, ``partial_fit`` adds
    plays, ``select_arm`` proposes the next layout and ``predict`` returns
    posterior mean success rates of given layouts.

    Parameters
    ----------
    choices : sequence of int
        Number of choices per dimension.
    policy : str, default="PPF2"
        Policy label: ``FPF``, ``PPFm``, ``DS``, ``Boosted-DSm``, ``FlatTS`` or ``DMabs``.
    searches : int, default=45
        Planning searches per selection.
    rounds : int, default=10
        Hill-climbing rounds for the DS variants.
    alpha0, beta0 : float, default=1.0
        Beta prior.
    random_state : int, Generator or None
        Seed for the selection stream.

    Examples
    --------
    >>> bandit = PathPlanningBandit(choices=(3, 3), random_state=0)
    >>> bandit = bandit.fit([[0, 1], [2, 2]], [1, 0])
    >>> len(bandit.select_arm())
    2
    """

    def __init__(self, choices=(2, 2), policy="PPF2", searches=45, rounds=10,
                 alpha0=1.0, beta0=1.0, random_state=None):
        self.choices = choices
        self.policy = policy
        self.searches = searches
        self.rounds = rounds
        self.alpha0 = alpha0
        self.beta0 = beta0
        self.random_state = random_state

    def _init_state(self):
        self.spec_ = DimensionSpec(tuple(self.choices))
        self.policy_ = PolicyConfig.from_name(self.policy, searches=self.searches,
                                              rounds=self.rounds,
                                              prior=Prior(self.alpha0, self.beta0))
        self.store_ = self.policy_.make_store(self.spec_)
        self.n_features_in_ = self.spec_.dims
        if isinstance(self.random_state, np.random.Generator):
            self.rng_ = self.random_state
        else:
            seed = check_random_state(self.random_state).randint(0, 2**31 - 1)
            self.rng_ = np.random.default_rng(seed)

    def _check_plays(self, X, y):
        X = check_array(X, dtype=np.int64, ensure_min_samples=0)
        y = np.asarray(y).ravel()
        if X.shape[1] != self.spec_.dims:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.spec_.dims}")
        if len(X) != len(y):
            raise ValueError("X and y differ in length")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("rewards must be 0 or 1")
        return X, y.astype(np.int64)

    def fit(self, X, y):
        """Reset the posterior and replay the plays ``(X, y)`` in order."""
        self._init_state()
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        if not hasattr(self, "store_"):
            self._init_state()
        X, y = self._check_plays(X, y)
        for layout, reward in zip(X.tolist(), y.tolist()):
            self.store_.update(layout, reward)
        return self

    def select_arm(self):
        """The next layout to play, as a tuple of choice codes."""
        if not hasattr(self, "store_"):
            self._init_state()
        return select_arm(self.policy_, self.store_, self.rng_)

    def predict(self, X):
        """Posterior mean success rate of each layout from its full-layout counts."""
        check_is_fitted(self, "store_")
        X = check_array(X, dtype=np.int64)
        for row in X:
            self.spec_.validate_layout(row)
        alpha, beta = self.store_.full_table()
        idx = tuple(X.T)
        return (alpha[idx] + self.alpha0) / (alpha[idx] + beta[idx] + self.alpha0 + self.beta0)
