"""Mean-outcome estimation from adaptively collected bandit data.

A library and CLI for off-policy evaluation when the logging policy
changes over time and samples are dependent: inverse-weighting, direct,
and doubly robust estimators (including variants that invert the
*average* logging policy and variants with a frozen outcome model),
adaptive nuisance fitting which trains each period's models only on the
preceding periods, martingale-based confidence intervals, synthetic
environments with bandit loggers, and a Monte Carlo harness.
"""

from .core import (
    ConfidenceInterval,
    ConfigurationError,
    DeficientSupportError,
    EstimateReport,
    EvaluationWeight,
    FixedVectorWeight,
    History,
    Sample,
    ate_weight,
    history_prefix,
)
from .dgp import (
    GaussianTwoArmDGP,
    SoftmaxContextualDGP,
    semiparametric_bound,
    true_value,
)
from .estimators import (
    ESTIMATOR_KINDS,
    EstimatorSpec,
    adaptive_estimate,
    dm_estimate,
    dr_score,
    ipw_estimate,
)
from .harness import (
    Scenario,
    aggregate,
    export_results,
    kde_curve,
    prepare_scenario,
    run_scenario,
    run_trial,
    simulate_history,
)
from .inference import (
    build_report,
    confidence_interval,
    mds_diagnostics,
    normal_quantile,
    score_variance,
)
from .nuisance import (
    NuisanceConfig,
    NuisanceSequence,
    build_nuisance_sequence,
    freeze_index,
    frozen_outcome_sequence,
    refit_points,
    running_average_propensity,
)
from .policies import (
    FixedPolicy,
    LinTSPolicy,
    LinUCBPolicy,
    NeymanRatioPolicy,
    PolicyDecision,
    fit_evaluation_policy,
    neyman_step,
    neyman_target,
)

__version__ = "0.1.0"

__all__ = [
    "ConfidenceInterval",
    "ConfigurationError",
    "DeficientSupportError",
    "ESTIMATOR_KINDS",
    "EstimateReport",
    "EstimatorSpec",
    "EvaluationWeight",
    "FixedPolicy",
    "FixedVectorWeight",
    "GaussianTwoArmDGP",
    "History",
    "LinTSPolicy",
    "LinUCBPolicy",
    "NeymanRatioPolicy",
    "NuisanceConfig",
    "NuisanceSequence",
    "PolicyDecision",
    "Sample",
    "Scenario",
    "SoftmaxContextualDGP",
    "adaptive_estimate",
    "aggregate",
    "ate_weight",
    "build_nuisance_sequence",
    "build_report",
    "confidence_interval",
    "dm_estimate",
    "dr_score",
    "export_results",
    "fit_evaluation_policy",
    "freeze_index",
    "frozen_outcome_sequence",
    "history_prefix",
    "ipw_estimate",
    "kde_curve",
    "mds_diagnostics",
    "neyman_step",
    "neyman_target",
    "normal_quantile",
    "prepare_scenario",
    "refit_points",
    "run_scenario",
    "run_trial",
    "running_average_propensity",
    "score_variance",
    "semiparametric_bound",
    "simulate_history",
    "true_value",
]
