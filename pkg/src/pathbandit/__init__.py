"""Multivariate Bernoulli bandits with Thompson-sampling path planning."""

__version__ = "0.1.0"

from .core import (BetaCounts, ConfigError, DimensionSpec, PartialAssignment, Prior,  # noqa: E402
                   SpecError, StateStore, backpropagate, sample_theta, store_counts)
from .estimator import PathPlanningBandit  # noqa: E402
from .policies import (DrawCounter, PolicyConfig, bst_ts_optimize, flat_ts_select,  # noqa: E402
                       plan_boosted_ds, plan_ds, plan_fpf, plan_ppf, select_arm, ts_optimize)
from .simulator import (SimulatorModel, default_controls, draw_reward, init_model,  # noqa: E402
                        linear_predictor, success_prob, true_best)

__all__ = [
    "BetaCounts", "ConfigError", "DimensionSpec", "DrawCounter", "PartialAssignment",
    "PathPlanningBandit", "PolicyConfig", "Prior", "SimulatorModel", "SpecError", "StateStore",
    "backpropagate", "bst_ts_optimize", "default_controls", "draw_reward", "flat_ts_select",
    "init_model", "linear_predictor", "plan_boosted_ds", "plan_ds", "plan_fpf", "plan_ppf",
    "sample_theta", "select_arm", "store_counts", "success_prob", "true_best", "ts_optimize",
]
