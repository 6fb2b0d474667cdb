"""Mean-outcome estimators for adaptively collected data.

All estimators reduce to per-period scores whose running mean is the
estimate.  Seven of the ten share one doubly-robust score kernel

    score_t = w(a_t|x_t) * (y_t - f(a_t, x_t)) / g(a_t|x_t)
              + sum_a w(a|x_t) * f(a, x_t)

and differ only in which outcome model ``f`` and divisor ``g`` are bound
at each period:

===========  ============================  =================================
kind         f bound at period t           g bound at period t
===========  ============================  =================================
``aipw``     pooled full-sample fit        logged true probabilities
``dr``       pooled full-sample fit        pooled full-sample fit
``a2ipw``    snapshot f_{t-1}              logged true probabilities
``adr``      snapshot f_{t-1}              snapshot g_{t-1}
``madr``     frozen snapshot sequence      snapshot g_{t-1}
``a3ipw``    snapshot f_{t-1}              running average of logged probs
``ma3ipw``   frozen snapshot sequence      running average of logged probs
===========  ============================  =================================

``ipw`` (inverse weighting by the logged probabilities alone), ``eipw``
(inverse weighting by the fitted snapshot propensities) and ``dm`` (pure
model-based average) have their own shapes.  Logged true probabilities
are never floored; a realized action with zero logged probability is a
deficient-support failure.  The running-average divisor is floored,
which is what makes the last two rows usable under deterministic
loggers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    DeficientSupportError,
    EstimateReport,
    EvaluationWeight,
    History,
)
from .inference import build_report
from .nuisance import (
    NuisanceSequence,
    freeze_index,
    frozen_outcome_sequence,
    outcome_table,
    propensity_table,
    running_average_propensity,
)

ESTIMATOR_KINDS = (
    "ipw",
    "eipw",
    "dm",
    "aipw",
    "dr",
    "a2ipw",
    "adr",
    "madr",
    "a3ipw",
    "ma3ipw",
)

_NEEDS_OUTCOME = {"dm", "aipw", "dr", "a2ipw", "adr", "madr", "a3ipw", "ma3ipw"}
_NEEDS_SNAPSHOT_PROPENSITY = {"eipw", "adr", "madr"}
_NEEDS_LOGGED = {"ipw", "aipw", "a2ipw", "a3ipw", "ma3ipw"}
_NEEDS_FULL_SAMPLE = {"aipw", "dr"}
_FROZEN = {"madr", "ma3ipw"}


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and how.

    ``eps`` floors the running-average divisor of the ``a3ipw`` family;
    ``freeze_at`` overrides the cube-root freeze point of the frozen
    variants (None picks ``freeze_index(T)``).
    """

    kind: str
    level: float = 0.95
    eps: float = 0.01
    freeze_at: int | None = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigurationError(
                f"unknown estimator kind {self.kind!r}; expected one of {', '.join(ESTIMATOR_KINDS)}"
            )


def _score_from_values(w_vec: np.ndarray, f_vec: np.ndarray, a_idx: int, y: float, g_real: float) -> float:
    if not g_real > 0.0:
        raise DeficientSupportError(
            f"realized action has nonpositive divisor probability {g_real}"
        )
    return float(w_vec[a_idx] * (y - f_vec[a_idx]) / g_real + np.sum(w_vec * f_vec))


def dr_score(sample, weight: EvaluationWeight, outcome, propensity) -> float:
    """The shared doubly-robust score of one sample under given bindings.

    ``outcome`` is an outcome model (all-action predictions at the
    sample's covariate), ``propensity`` a propensity model queried at the
    realized action only — unrealized actions never enter a division.
    """
    w = weight.vector(sample.x)
    f = outcome.predict_matrix(sample.x[None, :])[0]
    g_real = float(propensity.vector(sample.x)[sample.a - 1])
    return _score_from_values(w, f, sample.a - 1, sample.y, g_real)


def _realized_logged_probs(logged: np.ndarray, a_idx: np.ndarray) -> np.ndarray:
    g = logged[np.arange(a_idx.size), a_idx]
    if np.any(g <= 0.0):
        period = int(np.argmax(g <= 0.0)) + 1
        raise DeficientSupportError(
            f"logged policy puts zero probability on the realized action at period {period}"
        )
    return g


def _running_average_divisors(logged: np.ndarray, a_idx: np.ndarray, eps: float) -> np.ndarray:
    # Per-prefix entrywise means, vectorized.  Column-wise accumulation in a
    # cumulative sum matches the sequential accumulation a per-prefix
    # ``running_average_propensity`` call performs, so the two agree bitwise
    # (a property test pins this), while this form stays O(T) instead of
    # O(T^2) for long histories.
    horizon = a_idx.size
    counts = np.arange(1, horizon + 1, dtype=float)[:, None]
    means = np.cumsum(logged, axis=0) / counts
    return np.maximum(means, eps)[np.arange(horizon), a_idx]


def _full_model_table(history: History, nuisances: NuisanceSequence, which: str, x_mat: np.ndarray) -> np.ndarray:
    horizon = len(history)
    if which == "outcome":
        model, at = nuisances.full_outcome, nuisances.full_outcome_at
        predict = lambda m, xs: m.predict_matrix(xs)
    else:
        model, at = nuisances.full_propensity, nuisances.full_propensity_at
        predict = lambda m, xs: m.matrix(xs)
    if model is None:
        raise ConfigurationError(
            f"estimator needs a pooled full-sample {which} model; the nuisance sequence has none"
        )
    if not isinstance(model, tuple):
        return predict(model, x_mat)
    split = nuisances.fold_split
    out = np.empty((horizon, at(1).n_actions))
    out[:split] = predict(at(1), x_mat[:split])
    out[split:] = predict(at(horizon), x_mat[split:])
    return out


def adaptive_estimate(
    spec: EstimatorSpec,
    history: History,
    weight: EvaluationWeight,
    nuisances: NuisanceSequence | None = None,
) -> EstimateReport:
    """Run one estimator over a completed history.

    Bindings are resolved per the table in the module docstring; asking
    for bindings the nuisance sequence cannot supply is a configuration
    error, and a zero logged probability on a realized action is a
    deficient-support failure.
    """
    horizon = len(history)
    if horizon == 0:
        raise ValueError("cannot estimate from an empty history")
    kind = spec.kind
    if kind in _NEEDS_OUTCOME or kind in _NEEDS_SNAPSHOT_PROPENSITY:
        if nuisances is None:
            raise ConfigurationError(f"estimator {kind!r} requires a nuisance sequence")
        if len(nuisances) != horizon:
            raise ConfigurationError(
                f"nuisance sequence length {len(nuisances)} != history length {horizon}"
            )

    x_mat = history.covariates()
    y = history.outcomes()
    a_idx = history.actions() - 1
    w_mat = weight.matrix(x_mat) if x_mat.shape[1] else np.tile(weight.vector(np.zeros(0)), (horizon, 1))

    if kind == "dm":
        f_mat = outcome_table(nuisances.outcome, x_mat)
        scores = np.sum(w_mat * f_mat, axis=1)
        return build_report(scores, spec.level, kind)

    # Resolve the divisor at the realized actions.
    if kind in _NEEDS_LOGGED:
        logged = history.logged_policies()
        if kind in ("a3ipw", "ma3ipw"):
            g_real = _running_average_divisors(logged, a_idx, spec.eps)
        else:
            g_real = _realized_logged_probs(logged, a_idx)
    elif kind in _NEEDS_SNAPSHOT_PROPENSITY:
        g_mat = propensity_table(nuisances.propensity, x_mat)
        g_real = g_mat[np.arange(horizon), a_idx]
    elif kind == "dr":
        g_mat = _full_model_table(history, nuisances, "propensity", x_mat)
        g_real = g_mat[np.arange(horizon), a_idx]
    if np.any(g_real <= 0.0):
        period = int(np.argmax(g_real <= 0.0)) + 1
        raise DeficientSupportError(
            f"divisor probability is nonpositive at period {period}"
        )

    w_real = w_mat[np.arange(horizon), a_idx]
    if kind == "ipw" or kind == "eipw":
        scores = w_real * y / g_real
        return build_report(scores, spec.level, kind)

    # Resolve the outcome-model predictions.
    if kind in _NEEDS_FULL_SAMPLE:
        f_mat = _full_model_table(history, nuisances, "outcome", x_mat)
    elif kind in _FROZEN:
        u = spec.freeze_at if spec.freeze_at is not None else freeze_index(horizon)
        # Freeze points at or past the horizon freeze nothing, reducing the
        # frozen variants to their unfrozen counterparts.
        f_mat = outcome_table(frozen_outcome_sequence(nuisances, min(u, horizon)).outcome, x_mat)
    else:
        f_mat = outcome_table(nuisances.outcome, x_mat)

    f_real = f_mat[np.arange(horizon), a_idx]
    scores = w_real * (y - f_real) / g_real + np.sum(w_mat * f_mat, axis=1)
    return build_report(scores, spec.level, kind)


def ipw_estimate(history: History, weight: EvaluationWeight, level: float = 0.95) -> EstimateReport:
    """Inverse weighting by the true logged probabilities."""
    return adaptive_estimate(EstimatorSpec("ipw", level=level), history, weight)


def dm_estimate(
    history: History,
    weight: EvaluationWeight,
    nuisances: NuisanceSequence,
    level: float = 0.95,
) -> EstimateReport:
    """Pure model-based average of the per-period outcome snapshots."""
    return adaptive_estimate(EstimatorSpec("dm", level=level), history, weight, nuisances)
