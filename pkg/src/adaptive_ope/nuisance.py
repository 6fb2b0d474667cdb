"""Nuisance models fitted adaptively along a logged history.

The central object is a :class:`NuisanceSequence`: per-period snapshots
``(f_0, ..., f_{T-1})`` of the outcome model and ``(g_0, ..., g_{T-1})``
of the propensity model, where the snapshot used at period ``t`` was
fitted on a prefix of at most ``t - 1`` samples.  That measurability
discipline — period ``t``'s models never see sample ``t`` or anything
after it — is what the estimators' validity rests on, and it is what the
property tests perturb.

Outcome models are per-action Gaussian-kernel ridge regressions; the
propensity model is a multiclass Gaussian-kernel ridge logistic
regression fitted to the pooled prefix, so it estimates the *average*
logging policy rather than any single period's.  The kernel is
``exp(-(gamma / d) * ||x - x'||^2)`` for covariate dimension ``d``:
grid values act as per-coordinate scales, so one grid covers the same
smoothness range whatever the dimension (squared distances grow
linearly in ``d`` for standardized covariates).  Both ``gamma`` and the
ridge penalty are chosen from a small grid by a chronological holdout.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ConfigurationError, History
from .regression import kernel_logistic_fit, kernel_ridge_fit


@dataclass(frozen=True)
class NuisanceConfig:
    """Knobs for adaptive nuisance fitting.

    ``cadence`` is "doubling" (refit at prefix sizes 10, 20, 40, ...)
    or "every" (refit each period; only sensible for small runs).
    ``eps`` floors fitted propensities; fitted outcome predictions are
    clamped to ``[-outcome_clip, outcome_clip]``.
    """

    mode: str = "fitted"  # "fitted" | "oracle"
    cadence: str = "doubling"
    eps: float = 0.01
    lam_grid: tuple = (0.01, 0.1, 1.0)
    gamma_grid: tuple = (0.01, 0.1, 1.0)
    outcome_clip: float = 10.0
    holdout_fraction: float = 0.8
    max_iter: int = 200
    fit_full_sample: bool = False
    cross_fit: bool = False

    def __post_init__(self):
        if self.mode not in ("fitted", "oracle"):
            raise ConfigurationError(f"unknown nuisance mode {self.mode!r}")
        if self.cadence not in ("doubling", "every"):
            raise ConfigurationError(f"unknown refit cadence {self.cadence!r}")
        if not 0.0 < self.eps < 1.0:
            raise ConfigurationError("eps must lie in (0, 1)")


# ---------------------------------------------------------------------------
# Model wrappers
# ---------------------------------------------------------------------------


class OutcomeModel:
    """Per-action conditional-mean predictor."""

    n_actions: int

    def predict_matrix(self, x_mat: np.ndarray) -> np.ndarray:
        """Predictions for every action at each covariate row, shape (n, K)."""
        raise NotImplementedError

    def predict(self, a: int, x: np.ndarray) -> float:
        return float(self.predict_matrix(np.atleast_2d(x))[0, a - 1])


class ConstantOutcomeModel(OutcomeModel):
    """Covariate-independent per-action predictions (also the empty fallback)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.n_actions = self.values.size

    def predict_matrix(self, x_mat: np.ndarray) -> np.ndarray:
        return np.tile(self.values, (np.atleast_2d(x_mat).shape[0], 1))


def zero_outcome_model(n_actions: int) -> ConstantOutcomeModel:
    return ConstantOutcomeModel(np.zeros(n_actions))


class OracleOutcomeModel(OutcomeModel):
    """Wraps a DGP's oracle conditional means."""

    def __init__(self, dgp):
        self._dgp = dgp
        self.n_actions = dgp.n_actions

    def predict_matrix(self, x_mat: np.ndarray) -> np.ndarray:
        x_mat = np.atleast_2d(x_mat)
        if self._dgp.dim == 0:
            return np.tile(self._dgp.f_star(np.zeros(0)), (x_mat.shape[0], 1))
        return self._dgp.winner_probs(x_mat)


class KernelOutcomeModel(OutcomeModel):
    """Per-action kernel ridge fits with clamped predictions."""

    def __init__(self, fits: list, n_actions: int, clip: float):
        self.fits = fits  # entry None -> that action had no training samples
        self.n_actions = n_actions
        self.clip = clip

    def predict_matrix(self, x_mat: np.ndarray) -> np.ndarray:
        x_mat = np.atleast_2d(x_mat)
        out = np.zeros((x_mat.shape[0], self.n_actions))
        for i, fit in enumerate(self.fits):
            if fit is not None:
                out[:, i] = np.clip(fit.predict(x_mat), -self.clip, self.clip)
        return out


class PropensityModel:
    """Per-action probability of being logged, floored away from zero."""

    n_actions: int
    eps: float

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vector(self, x: np.ndarray) -> np.ndarray:
        return self.matrix(np.atleast_2d(x))[0]

    def propensity(self, a: int, x: np.ndarray) -> float:
        return float(self.vector(x)[a - 1])


class ConstantPropensityModel(PropensityModel):
    def __init__(self, probs, eps: float):
        self.raw = np.asarray(probs, dtype=float)
        self.n_actions = self.raw.size
        self.eps = eps

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        row = np.maximum(self.raw, self.eps)
        return np.tile(row, (np.atleast_2d(x_mat).shape[0], 1))


class KernelPropensityModel(PropensityModel):
    def __init__(self, fit, eps: float):
        self._fit = fit
        self.n_actions = fit.n_classes
        self.eps = eps

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        return np.maximum(self._fit.predict_proba(np.atleast_2d(x_mat)), self.eps)


def running_average_propensity(policy_prob_prefix, eps: float = 0.01) -> ConstantPropensityModel:
    """Entrywise mean of logged probability vectors, floored at ``eps``.

    The floor lifts never-pulled arms off zero; the vector is *not*
    renormalized afterwards, so the division the estimators perform stays
    a clean reciprocal of the averaged logging probability.
    """
    rows = np.atleast_2d(np.asarray(policy_prob_prefix, dtype=float))
    if rows.shape[0] == 0:
        raise ValueError("running average requires at least one logged vector")
    return ConstantPropensityModel(rows.mean(axis=0), eps)


# ---------------------------------------------------------------------------
# Freeze rule
# ---------------------------------------------------------------------------


def freeze_index(horizon: int) -> int:
    """Cube-root freeze point: the smallest integer ``u`` with ``u^3 >= T``."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    u = max(1, round(horizon ** (1.0 / 3.0)))
    while u**3 < horizon:
        u += 1
    while u > 1 and (u - 1) ** 3 >= horizon:
        u -= 1
    return u


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


@dataclass
class NuisanceSequence:
    """Per-period nuisance snapshots plus optional pooled-sample fits.

    ``outcome[i]`` and ``propensity[i]`` are the models available to
    period ``i + 1`` (fitted on at most ``i`` samples).  ``full_outcome``
    / ``full_propensity`` are fitted on the entire sample at once — the
    classical-baseline bindings — either as single models or as a
    2-fold pair (``cross_fit``).
    """

    outcome: list
    propensity: list
    cadence: str = "doubling"
    mode: str = "fitted"
    full_outcome: object = None
    full_propensity: object = None
    fold_split: int | None = None  # cross-fit boundary (periods <= split use fold 2's model)
    hyperparams: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.outcome)

    def full_outcome_at(self, t: int):
        model = self.full_outcome
        if isinstance(model, tuple):
            return model[1] if t <= self.fold_split else model[0]
        return model

    def full_propensity_at(self, t: int):
        model = self.full_propensity
        if isinstance(model, tuple):
            return model[1] if t <= self.fold_split else model[0]
        return model


def frozen_outcome_sequence(sequence: NuisanceSequence, u: int) -> NuisanceSequence:
    """Outcome snapshots with updates stopped after period ``u``.

    Periods ``t <= u`` keep their own snapshot; every later period reuses
    the snapshot fitted for period ``u + 1`` (the one trained on the
    first ``u`` samples).  ``u = len`` freezes nothing.
    """
    if not 1 <= u <= len(sequence):
        raise ValueError(
            f"freeze point must lie in [1, {len(sequence)}], got {u}"
        )
    outcome = list(sequence.outcome)
    if u < len(outcome):
        frozen = outcome[u]
        for i in range(u, len(outcome)):
            outcome[i] = frozen
    return replace(sequence, outcome=outcome)


def refit_points(horizon: int, cadence: str, extra: tuple = ()) -> list[int]:
    """Prefix lengths at which models are (re)fitted, always including 0."""
    if cadence == "every":
        return list(range(horizon))
    points = {0}
    size = 10
    while size <= horizon - 1:
        points.add(size)
        size *= 2
    points.update(int(q) for q in extra if 0 < q <= horizon - 1)
    return sorted(points)


def snapshot_prefix_lengths(horizon: int, cadence: str, extra: tuple = ()) -> list[int]:
    """For each period t = 1..T, the prefix length its snapshot was fitted on."""
    points = refit_points(horizon, cadence, extra)
    return [points[bisect_right(points, t - 1) - 1] for t in range(1, horizon + 1)]


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _holdout_split(n: int, fraction: float) -> int:
    return int(np.floor(n * fraction))


def _kernel_scale(gamma: float, dim: int) -> float:
    """Grid value -> kernel scale; grid entries are per-coordinate scales."""
    return gamma / max(dim, 1)


def fit_outcome_model(history: History, config: NuisanceConfig, n_actions: int) -> OutcomeModel:
    """Per-action kernel ridge fit on a history prefix.

    Hyperparameters are picked per action by chronological holdout
    (first 80% fit / last 20% validate on squared error), then the
    winner is refitted on the action's full subsample.  Actions with no
    samples fall back to predicting zero; actions too small to validate
    use the middle of each grid.
    """
    if len(history) == 0:
        return zero_outcome_model(n_actions)
    x_all = history.covariates()
    y_all = history.outcomes()
    a_all = history.actions()
    n_fit = _holdout_split(len(history), config.holdout_fraction)
    default = (config.lam_grid[len(config.lam_grid) // 2], config.gamma_grid[len(config.gamma_grid) // 2])
    fits: list = []
    chosen: dict = {}
    for action in range(1, n_actions + 1):
        mask = a_all == action
        if not mask.any():
            fits.append(None)
            continue
        fit_mask = mask.copy()
        fit_mask[n_fit:] = False
        val_mask = mask.copy()
        val_mask[:n_fit] = False
        lam, gamma = default
        if fit_mask.any() and val_mask.any():
            best = np.inf
            x_fit, y_fit = x_all[fit_mask], y_all[fit_mask]
            x_val, y_val = x_all[val_mask], y_all[val_mask]
            for cand_gamma in config.gamma_grid:
                for cand_lam in config.lam_grid:
                    model = kernel_ridge_fit(
                        x_fit, y_fit, cand_lam, _kernel_scale(cand_gamma, x_all.shape[1])
                    )
                    loss = float(np.sum((y_val - model.predict(x_val)) ** 2))
                    if loss < best:
                        best, lam, gamma = loss, cand_lam, cand_gamma
        fits.append(
            kernel_ridge_fit(x_all[mask], y_all[mask], lam, _kernel_scale(gamma, x_all.shape[1]))
        )
        chosen[action] = (lam, gamma)
    model = KernelOutcomeModel(fits, n_actions, config.outcome_clip)
    model.chosen_hyperparams = chosen
    return model


def fit_propensity_model(history: History, config: NuisanceConfig, n_actions: int) -> PropensityModel:
    """Multiclass kernel logistic fit of action on covariate over a prefix.

    The pooled fit targets the average logging policy.  Hyperparameters
    come from the same chronological holdout (validated on log-loss);
    outputs are floored at ``config.eps`` and not renormalized.
    """
    if len(history) == 0:
        return ConstantPropensityModel(np.full(n_actions, 1.0 / n_actions), config.eps)
    x_all = history.covariates()
    labels = history.actions() - 1
    n_fit = _holdout_split(len(history), config.holdout_fraction)
    default = (config.lam_grid[len(config.lam_grid) // 2], config.gamma_grid[len(config.gamma_grid) // 2])
    lam, gamma = default
    if n_fit >= 1 and n_fit < len(history):
        best = np.inf
        x_fit, l_fit = x_all[:n_fit], labels[:n_fit]
        x_val, l_val = x_all[n_fit:], labels[n_fit:]
        for cand_gamma in config.gamma_grid:
            warm = None
            for cand_lam in config.lam_grid:
                fit = kernel_logistic_fit(
                    x_fit, l_fit, n_actions, cand_lam,
                    _kernel_scale(cand_gamma, x_all.shape[1]),
                    coef0=warm, max_iter=config.max_iter,
                )
                warm = fit.coef
                probs = fit.predict_proba(x_val)
                loss = -float(np.sum(np.log(np.maximum(probs[np.arange(l_val.size), l_val], 1e-12))))
                if loss < best:
                    best, lam, gamma = loss, cand_lam, cand_gamma
    fit = kernel_logistic_fit(
        x_all, labels, n_actions, lam, _kernel_scale(gamma, x_all.shape[1]),
        max_iter=config.max_iter,
    )
    model = KernelPropensityModel(fit, config.eps)
    model.chosen_hyperparams = (lam, gamma)
    return model


def build_nuisance_sequence(
    history: History,
    config: NuisanceConfig,
    n_actions: int,
    dgp=None,
    logged_constant_probs=None,
) -> NuisanceSequence:
    """Fit the per-period snapshot sequence for a completed history.

    Respects the refit cadence: each period's snapshot is the model
    fitted at the latest refit point no later than the period's prefix.
    The freeze point ``u(T)`` is always included among the refit points
    so frozen variants reuse a model genuinely fitted on ``u`` samples.

    With ``mode="oracle"`` the outcome snapshots are the DGP's oracle
    means and the propensity snapshots are the known constant logging
    probabilities — available only when those exist.
    """
    horizon = len(history)
    if horizon < 1:
        raise ValueError("cannot build nuisances for an empty history")

    if config.mode == "oracle":
        if dgp is None:
            raise ConfigurationError("oracle nuisances require the data-generating process")
        if logged_constant_probs is None:
            raise ConfigurationError(
                "oracle nuisances require known constant logging probabilities"
            )
        outcome_model = OracleOutcomeModel(dgp)
        prop_model = ConstantPropensityModel(np.asarray(logged_constant_probs, float), config.eps)
        return NuisanceSequence(
            outcome=[outcome_model] * horizon,
            propensity=[prop_model] * horizon,
            cadence=config.cadence,
            mode="oracle",
            full_outcome=outcome_model,
            full_propensity=prop_model,
        )

    extra = (freeze_index(horizon),)
    points = refit_points(horizon, config.cadence, extra)
    fitted: dict[int, tuple] = {}
    log: dict = {}
    for m in points:
        prefix = history.prefix(m)
        f_model = fit_outcome_model(prefix, config, n_actions)
        g_model = fit_propensity_model(prefix, config, n_actions)
        fitted[m] = (f_model, g_model)
        log[str(m)] = {
            "outcome": {str(a): list(v) for a, v in getattr(f_model, "chosen_hyperparams", {}).items()},
            "propensity": list(g_model.chosen_hyperparams)
            if hasattr(g_model, "chosen_hyperparams")
            else None,
        }
    lengths = snapshot_prefix_lengths(horizon, config.cadence, extra)
    outcome = [fitted[m][0] for m in lengths]
    propensity = [fitted[m][1] for m in lengths]

    full_outcome = full_propensity = None
    fold_split = None
    if config.fit_full_sample:
        if config.cross_fit:
            fold_split = horizon // 2
            first, second = history.prefix(fold_split), History(list(history)[fold_split:])
            full_outcome = (
                fit_outcome_model(first, config, n_actions),
                fit_outcome_model(second, config, n_actions),
            )
            full_propensity = (
                fit_propensity_model(first, config, n_actions),
                fit_propensity_model(second, config, n_actions),
            )
        else:
            full_outcome = fit_outcome_model(history, config, n_actions)
            full_propensity = fit_propensity_model(history, config, n_actions)

    return NuisanceSequence(
        outcome=outcome,
        propensity=propensity,
        cadence=config.cadence,
        mode="fitted",
        full_outcome=full_outcome,
        full_propensity=full_propensity,
        fold_split=fold_split,
        hyperparams=log,
    )


# ---------------------------------------------------------------------------
# Batched per-period prediction tables
# ---------------------------------------------------------------------------


def _grouped_rows(models: list, x_mat: np.ndarray, predict) -> np.ndarray:
    """Evaluate per-period models at their own period's covariate.

    Consecutive periods sharing one snapshot (the usual case under a
    refit cadence) are evaluated in a single batched call.
    """
    horizon = len(models)
    out = None
    start = 0
    while start < horizon:
        stop = start + 1
        while stop < horizon and models[stop] is models[start]:
            stop += 1
        block = predict(models[start], x_mat[start:stop])
        if out is None:
            out = np.empty((horizon, block.shape[1]))
        out[start:stop] = block
        start = stop
    return out


def outcome_table(models: list, x_mat: np.ndarray) -> np.ndarray:
    """``table[t-1, a-1] = f_snapshot_for_t(a, X_t)`` for all periods/actions."""
    return _grouped_rows(models, x_mat, lambda m, xs: m.predict_matrix(xs))


def propensity_table(models: list, x_mat: np.ndarray) -> np.ndarray:
    """``table[t-1, a-1] = g_snapshot_for_t(a | X_t)``, floored per model."""
    return _grouped_rows(models, x_mat, lambda m, xs: m.matrix(xs))
