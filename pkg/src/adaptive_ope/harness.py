"""Monte Carlo driver: scenarios, trials, aggregation, and file export.

A scenario marries a data-generating process, a logging policy, a target
weight, a horizon and an estimator list.  Contextual scenarios follow a
three-dataset pipeline fixed *per scenario*: a labeled draw trains the
evaluation policy, a large independent draw pins the target value, and
only the bandit data is regenerated per trial.  Per-trial randomness is
seeded by (base seed, trial index), so trials are reproducible
individually and safe to run in any order or in parallel.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    ConfigurationError,
    DeficientSupportError,
    EvaluationWeight,
    History,
    Sample,
    ate_weight,
    check_outcome_bound,
)
from .dgp import GaussianTwoArmDGP, SoftmaxContextualDGP, semiparametric_bound, true_value
from .estimators import ESTIMATOR_KINDS, EstimatorSpec, adaptive_estimate
from .inference import mds_diagnostics
from .nuisance import NuisanceConfig, build_nuisance_sequence
from .policies import (
    FixedPolicy,
    LinTSPolicy,
    LinUCBPolicy,
    NeymanRatioPolicy,
    fit_evaluation_policy,
)

DGP_KINDS = ("gaussian-two-arm", "softmax-contextual")
LOGGER_KINDS = ("neyman-ratio", "linucb", "lints", "fixed")

_SEED_EVAL_POLICY = 0xE7A1
_SEED_TRIAL = 0x7B1A


@dataclass
class Scenario:
    """One (DGP, logger, horizon) cell of an experiment grid."""

    name: str
    dgp: str
    logger: str
    horizon: int
    estimators: tuple = ()
    n_trials: int = 100
    base_seed: int = 0
    nuisance: NuisanceConfig = field(default_factory=NuisanceConfig)
    logger_params: dict = field(default_factory=dict)
    eval_policy_size: int = 1_000
    oracle_budget: int = 100_000

    def __post_init__(self):
        if self.dgp not in DGP_KINDS:
            raise ConfigurationError(f"unknown dgp {self.dgp!r}; expected one of {DGP_KINDS}")
        if self.logger not in LOGGER_KINDS:
            raise ConfigurationError(
                f"unknown logger {self.logger!r}; expected one of {LOGGER_KINDS}"
            )
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_trials < 1:
            raise ConfigurationError(f"n_trials must be >= 1, got {self.n_trials}")
        self.estimators = tuple(self.estimators) or _default_estimators(self.dgp)
        for kind in self.estimators:
            if kind not in ESTIMATOR_KINDS:
                raise ConfigurationError(f"unknown estimator kind {kind!r}")


def _default_estimators(dgp: str) -> tuple:
    if dgp == "gaussian-two-arm":
        return ESTIMATOR_KINDS
    return ("ipw", "eipw", "aipw", "dm", "dr", "a2ipw", "adr")


@dataclass
class ScenarioContext:
    """A scenario with its per-scenario objects materialized."""

    scenario: Scenario
    dgp: object
    weight: EvaluationWeight
    truth: float
    psi: float | None  # oracle asymptotic variance at the expected average allocation
    alpha_bar: tuple | None


def prepare_scenario(scenario: Scenario) -> ScenarioContext:
    """Materialize the DGP, evaluation weight and truth for a scenario."""
    if scenario.dgp == "gaussian-two-arm":
        dgp = GaussianTwoArmDGP()
        weight = ate_weight()
        truth = true_value(dgp, weight)
        alpha_bar = _expected_average_allocation(scenario, dgp)
        psi = semiparametric_bound(dgp, weight, alpha_bar) if alpha_bar is not None else None
        return ScenarioContext(scenario, dgp, weight, truth, psi, alpha_bar)

    dgp = SoftmaxContextualDGP.from_seed(scenario.base_seed)
    rng = np.random.default_rng(
        np.random.SeedSequence((scenario.base_seed, _SEED_EVAL_POLICY))
    )
    x_mat = rng.standard_normal((scenario.eval_policy_size, dgp.dim))
    winner_probs = dgp.winner_probs(x_mat)
    winners = np.array(
        [rng.choice(dgp.n_actions, p=row) for row in winner_probs], dtype=int
    ) + 1
    weight = fit_evaluation_policy(x_mat, winners, dgp.n_actions)
    truth = true_value(dgp, weight, scenario.oracle_budget)
    return ScenarioContext(scenario, dgp, weight, truth, None, None)


def _expected_average_allocation(scenario: Scenario, dgp: GaussianTwoArmDGP):
    """Limit of the average logging allocation, where known analytically."""
    if scenario.logger == "fixed":
        return tuple(float(p) for p in scenario.logger_params.get("probs", ()))or None
    if scenario.logger == "neyman-ratio":
        sds = np.sqrt(dgp.variances)
        return tuple(sds / sds.sum())
    return None


def make_logger(scenario: Scenario, dgp) -> object:
    params = scenario.logger_params
    if scenario.logger == "neyman-ratio":
        if dgp.n_actions != 2 or dgp.dim != 0:
            raise ConfigurationError("the variance-ratio logger needs two arms and no covariates")
        return NeymanRatioPolicy()
    if scenario.logger == "fixed":
        probs = params.get("probs")
        if probs is None:
            raise ConfigurationError("fixed logger requires logger_params['probs']")
        return FixedPolicy(probs)
    if scenario.logger == "linucb":
        return LinUCBPolicy(
            dgp.n_actions,
            dgp.dim,
            ridge=params.get("ridge", 1.0),
            ucb_scale=params.get("ucb_scale"),
        )
    return LinTSPolicy(
        dgp.n_actions,
        dgp.dim,
        ridge=params.get("ridge", 1.0),
        noise_var=params.get("noise_var", 1.0),
        prob_draws=params.get("prob_draws", 0),
    )


def simulate_history(dgp, policy, horizon: int, rng: np.random.Generator) -> History:
    """Run one adaptive experiment: sequential decisions, logged probabilities."""
    history = History()
    for _ in range(horizon):
        x = dgp.draw_covariate(rng)
        decision = policy.decide(x, rng)
        outcomes = dgp.draw_potential_outcomes(x, rng)
        y = float(outcomes[decision.action - 1])
        check_outcome_bound(y, dgp.outcome_bound, dgp.hard_bound)
        sample = Sample(x, decision.action, y, decision.probs)
        policy.observe(sample)
        history.append(sample)
    return history


@dataclass
class EstimatorOutcome:
    estimate: float | None
    error: float | None
    covered: bool | None
    variance: float | None
    failed: bool = False
    message: str = ""
    diagnostics: dict | None = None


@dataclass
class TrialResult:
    trial: int
    outcomes: dict  # kind -> EstimatorOutcome
    hyperparams: dict = field(default_factory=dict)


def run_trial(context: ScenarioContext, trial_index: int) -> TrialResult:
    """Simulate one experiment and evaluate every requested estimator on it.

    Estimator-specific failures (deficient support, impossible bindings)
    are recorded against that estimator without sinking the trial.
    """
    scenario = context.scenario
    rng = np.random.default_rng(
        np.random.SeedSequence((scenario.base_seed, _SEED_TRIAL, trial_index))
    )
    policy = make_logger(scenario, context.dgp)
    history = simulate_history(context.dgp, policy, scenario.horizon, rng)

    kinds = scenario.estimators
    needs_nuisance = any(k not in ("ipw",) for k in kinds)
    nuisances = None
    hyperparams: dict = {}
    if needs_nuisance:
        config = scenario.nuisance
        if {"aipw", "dr"} & set(kinds) and not config.fit_full_sample:
            config = _with_full_sample(config)
        logged_probs = getattr(policy, "probs", None)
        if config.mode == "oracle" and logged_probs is None:
            # Adaptive loggers have no constant probabilities; running-average
            # estimators never consult the propensity snapshots, so a uniform
            # placeholder keeps the oracle outcome means available.
            logged_probs = np.full(context.dgp.n_actions, 1.0 / context.dgp.n_actions)
        nuisances = build_nuisance_sequence(
            history,
            config,
            context.dgp.n_actions,
            dgp=context.dgp,
            logged_constant_probs=logged_probs,
        )
        hyperparams = nuisances.hyperparams

    outcomes = {}
    for kind in kinds:
        spec = EstimatorSpec(kind, eps=scenario.nuisance.eps)
        try:
            report = adaptive_estimate(spec, history, context.weight, nuisances)
        except (DeficientSupportError, ConfigurationError) as exc:
            outcomes[kind] = EstimatorOutcome(
                estimate=None, error=None, covered=None, variance=None,
                failed=True, message=str(exc),
            )
            continue
        diag = None
        if context.psi is not None and scenario.horizon >= 2:
            diag = mds_diagnostics(report, context.psi, context.truth)
        outcomes[kind] = EstimatorOutcome(
            estimate=report.estimate,
            error=context.truth - report.estimate,
            covered=bool(report.ci.covers(context.truth)),
            variance=report.variance,
            diagnostics=diag,
        )
    return TrialResult(trial=trial_index, outcomes=outcomes, hyperparams=hyperparams)


def _with_full_sample(config: NuisanceConfig) -> NuisanceConfig:
    return replace(config, fit_full_sample=True)


@dataclass
class MetricsRow:
    scenario: str
    logger: str
    horizon: int
    estimator: str
    rmse: float
    sd: float
    cr: float
    n_trials: int


@dataclass
class ScenarioResult:
    context: ScenarioContext
    trials: list
    metrics: list


def _trial_job(payload):
    context, index = payload
    return run_trial(context, index)


def run_scenario(scenario: Scenario, jobs: int = 1) -> ScenarioResult:
    """Run every trial of a scenario, optionally across worker processes.

    Trials are seeded by index, so the aggregate is identical whatever
    the execution order or degree of parallelism.
    """
    context = prepare_scenario(scenario)
    indices = range(scenario.n_trials)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_trial_job, [(context, i) for i in indices], chunksize=4))
    else:
        trials = [run_trial(context, i) for i in indices]
    trials.sort(key=lambda r: r.trial)
    return ScenarioResult(context, trials, aggregate(context, trials))


def aggregate(context: ScenarioContext, trials: list) -> list:
    """Trial records -> per-estimator metric rows.

    ``rmse`` is the root of the mean squared error, ``sd`` the standard
    deviation of the squared errors across trials, ``cr`` the fraction of
    successful trials whose interval covered the truth.  ``n_trials``
    counts the trials where the estimator actually ran.
    """
    if not trials:
        raise ValueError("aggregate requires at least one trial")
    scenario = context.scenario
    rows = []
    for kind in scenario.estimators:
        errors = np.array(
            [t.outcomes[kind].error for t in trials if not t.outcomes[kind].failed]
        )
        covered = np.array(
            [t.outcomes[kind].covered for t in trials if not t.outcomes[kind].failed]
        )
        if errors.size:
            sq = errors**2
            rmse = float(np.sqrt(sq.mean()))
            sd = float(sq.std())
            cr = float(covered.mean())
        else:
            rmse = sd = cr = float("nan")
        rows.append(
            MetricsRow(
                scenario=scenario.name,
                logger=scenario.logger,
                horizon=scenario.horizon,
                estimator=kind,
                rmse=rmse,
                sd=sd,
                cr=cr,
                n_trials=int(errors.size),
            )
        )
    return rows


def kde_curve(errors, bandwidth: float, grid) -> np.ndarray:
    """Gaussian kernel density of ``errors`` evaluated on ``grid``."""
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("kde requires at least one error")
    grid = np.asarray(grid, dtype=float)
    z = (grid[:, None] - errors[None, :]) / bandwidth
    return np.exp(-0.5 * z**2).sum(axis=1) / (errors.size * bandwidth * math.sqrt(2.0 * math.pi))


def default_kde_grid(errors: np.ndarray, bandwidth: float, points: int = 101) -> np.ndarray:
    lo = float(errors.min()) - 3.0 * bandwidth
    hi = float(errors.max()) + 3.0 * bandwidth
    return np.linspace(lo, hi, points)


def scott_bandwidth(errors: np.ndarray) -> float:
    spread = float(np.std(errors, ddof=1)) if errors.size > 1 else 0.0
    if spread == 0.0:
        return 1e-3
    return spread * errors.size ** (-0.2)


def _dgp_params(dgp) -> dict:
    """JSON-serializable record of the drawn/configured DGP parameters."""
    if isinstance(dgp, SoftmaxContextualDGP):
        return {
            "signs": [int(s) for s in dgp.signs],
            "dim": int(dgp.dim),
            "seed": dgp.seed,
        }
    return {
        "means": [float(m) for m in dgp.means],
        "variances": [float(v) for v in dgp.variances],
    }


def export_results(results: list, out_dir: str) -> dict:
    """Write metrics.csv, errors.csv, kde.csv and meta.json under ``out_dir``.

    Float cells use shortest round-trip formatting, so identical runs
    produce byte-identical files.  Returns the paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "metrics": os.path.join(out_dir, "metrics.csv"),
        "errors": os.path.join(out_dir, "errors.csv"),
        "kde": os.path.join(out_dir, "kde.csv"),
        "meta": os.path.join(out_dir, "meta.json"),
    }

    def fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with open(paths["metrics"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "logger", "T", "estimator", "rmse", "sd", "cr", "n_trials"])
        for result in results:
            for row in result.metrics:
                writer.writerow(
                    [row.scenario, row.logger, row.horizon, row.estimator,
                     fmt(row.rmse), fmt(row.sd), fmt(row.cr), row.n_trials]
                )

    with open(paths["errors"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "logger", "T", "estimator", "trial", "error", "covered", "failed"])
        for result in results:
            scenario = result.context.scenario
            for trial in result.trials:
                for kind in scenario.estimators:
                    out = trial.outcomes[kind]
                    writer.writerow(
                        [scenario.name, scenario.logger, scenario.horizon, kind, trial.trial,
                         fmt(out.error),
                         "" if out.covered is None else int(out.covered),
                         int(out.failed)]
                    )

    with open(paths["kde"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "logger", "T", "estimator", "grid", "density"])
        for result in results:
            scenario = result.context.scenario
            for kind in scenario.estimators:
                errors = np.array(
                    [t.outcomes[kind].error for t in result.trials if not t.outcomes[kind].failed]
                )
                if errors.size == 0:
                    continue
                bandwidth = scott_bandwidth(errors)
                grid = default_kde_grid(errors, bandwidth)
                for g, d in zip(grid, kde_curve(errors, bandwidth, grid)):
                    writer.writerow(
                        [scenario.name, scenario.logger, scenario.horizon, kind, repr(float(g)), repr(float(d))]
                    )

    meta = {"runs": []}
    for result in results:
        scenario = result.context.scenario
        entry = {
            "scenario": scenario.name,
            "dgp": scenario.dgp,
            "dgp_params": _dgp_params(result.context.dgp),
            "logger": scenario.logger,
            "T": scenario.horizon,
            "estimators": list(scenario.estimators),
            "n_trials": scenario.n_trials,
            "base_seed": scenario.base_seed,
            "seed_scheme": "SeedSequence((base_seed, stream_tag[, trial_index]))",
            "truth": result.context.truth,
            "oracle_variance": result.context.psi,
            "average_allocation": list(result.context.alpha_bar) if result.context.alpha_bar else None,
            "nuisance": asdict(scenario.nuisance),
            "logger_params": scenario.logger_params,
            "trials": [
                {
                    "trial": t.trial,
                    "nuisance_hyperparameters": t.hyperparams,
                    "estimators": {
                        kind: {
                            "estimate": out.estimate,
                            "error": out.error,
                            "covered": out.covered,
                            "variance": out.variance,
                            "failed": out.failed,
                            "message": out.message,
                            "mds_diagnostics": out.diagnostics,
                        }
                        for kind, out in t.outcomes.items()
                    },
                }
                for t in result.trials
            ],
        }
        meta["runs"].append(entry)
    with open(paths["meta"], "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
