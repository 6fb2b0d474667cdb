"""Logging policies for simulated adaptive experiments.

A policy exposes ``decide(x, rng) -> PolicyDecision`` and
``observe(sample)``.  The decision carries the probability vector the
policy assigned over arms at that moment; deterministic rules log a
one-hot vector.  All policies are driven by the caller-supplied
generator, never by global random state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EvaluationWeight, History, Sample
from .regression import MultinomialLogisticFit, multinomial_logistic_fit


@dataclass(frozen=True)
class PolicyDecision:
    action: int  # 1-based
    probs: np.ndarray


def _one_hot(action: int, n_actions: int) -> np.ndarray:
    probs = np.zeros(n_actions)
    probs[action - 1] = 1.0
    return probs


class FixedPolicy:
    """Stationary stochastic policy with a fixed probability vector."""

    name = "fixed"

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be a probability vector")
        self.probs = p
        self.n_actions = p.size

    def decide(self, x: np.ndarray, rng: np.random.Generator) -> PolicyDecision:
        action = int(rng.choice(self.n_actions, p=self.probs)) + 1
        return PolicyDecision(action, self.probs.copy())

    def observe(self, sample: Sample) -> None:
        pass


# ---------------------------------------------------------------------------
# Variance-ratio tracking allocation (two arms, no covariates)
# ---------------------------------------------------------------------------

#: Minimum share the estimated variance-ratio target may assign an arm.
#: Without a floor, an arm whose first observations happen to lie close
#: together gets a near-zero standard-deviation estimate, the tracker
#: stops pulling it, and the bad estimate can never update — a
#: self-locking starvation spiral whose rare huge inverse-propensity
#: scores dominate the variance of every divisor-based estimator.
NEYMAN_SHARE_FLOOR = 0.1


def _clip_share(share_arm_one: float) -> np.ndarray:
    clipped = min(max(share_arm_one, NEYMAN_SHARE_FLOOR), 1.0 - NEYMAN_SHARE_FLOOR)
    return np.array([clipped, 1.0 - clipped])


def neyman_target(history: History) -> np.ndarray:
    """Square-root-of-variance allocation estimated from a history.

    Returns the probability vector proportional to the empirical outcome
    standard deviation of each of two arms, clipped into
    ``[NEYMAN_SHARE_FLOOR, 1 - NEYMAN_SHARE_FLOOR]`` so a degenerate
    early variance estimate cannot starve an arm.  Until both arms have
    at least two observations (or when both variance estimates vanish)
    the target stays at (0.5, 0.5).
    """
    outcomes = {1: [], 2: []}
    for s in history:
        if s.a not in outcomes:
            raise ValueError("variance-ratio allocation is defined for two arms")
        outcomes[s.a].append(s.y)
    if any(len(v) < 2 for v in outcomes.values()):
        return np.array([0.5, 0.5])
    sds = np.array([np.std(outcomes[1], ddof=1), np.std(outcomes[2], ddof=1)])
    total = sds.sum()
    if total == 0.0:
        return np.array([0.5, 0.5])
    return _clip_share(sds[0] / total)


class NeymanRatioPolicy:
    """Deterministic tracker of the estimated variance-ratio allocation.

    At period t (having seen t-1 samples) it computes the target share
    for arm 1 and pulls arm 1 exactly when ``N(1)/t <= target``, which
    keeps the realized share within 1/t of any frozen target.  Decisions
    are deterministic, so logged vectors are one-hot.
    """

    name = "neyman-ratio"
    n_actions = 2

    def __init__(self):
        self.counts = np.zeros(2, dtype=int)
        self.sums = np.zeros(2)
        self.sumsqs = np.zeros(2)
        self._frozen_target: float | None = None

    def freeze_target(self, share_arm_one: float) -> None:
        """Pin the arm-1 target share (diagnostics and tracking tests)."""
        self._frozen_target = float(share_arm_one)

    def target(self) -> np.ndarray:
        """Estimated target share, clipped like :func:`neyman_target`.

        Frozen targets are caller-chosen and pass through unclipped.
        """
        if self._frozen_target is not None:
            return np.array([self._frozen_target, 1.0 - self._frozen_target])
        if np.any(self.counts < 2):
            return np.array([0.5, 0.5])
        n = self.counts.astype(float)
        variances = (self.sumsqs - n * (self.sums / n) ** 2) / (n - 1.0)
        sds = np.sqrt(np.maximum(variances, 0.0))
        total = sds.sum()
        if total == 0.0:
            return np.array([0.5, 0.5])
        return _clip_share(sds[0] / total)

    def decide(self, x: np.ndarray = None, rng: np.random.Generator = None) -> PolicyDecision:
        t = int(self.counts.sum()) + 1
        share = self.counts[0] / t
        action = 1 if share <= self.target()[0] else 2
        return PolicyDecision(action, _one_hot(action, 2))

    def observe(self, sample: Sample) -> None:
        i = sample.a - 1
        self.counts[i] += 1
        self.sums[i] += sample.y
        self.sumsqs[i] += sample.y**2


def neyman_step(policy: NeymanRatioPolicy, history: History) -> PolicyDecision:
    """Next decision of the tracking rule given the policy's own state.

    ``history`` is accepted for signature symmetry with the other
    steppers; the policy's counters already summarize it.
    """
    return policy.decide()


# ---------------------------------------------------------------------------
# Linear contextual bandits
# ---------------------------------------------------------------------------


class _LinearBanditState:
    """Per-arm ridge statistics on covariates with an appended bias term."""

    def __init__(self, n_actions: int, dim: int, ridge: float):
        self.n_actions = n_actions
        self.aug_dim = dim + 1
        self.grams = [ridge * np.eye(self.aug_dim) for _ in range(n_actions)]
        self.loads = [np.zeros(self.aug_dim) for _ in range(n_actions)]

    @staticmethod
    def augment(x: np.ndarray) -> np.ndarray:
        return np.concatenate([x, [1.0]])

    def update(self, sample: Sample) -> None:
        z = self.augment(sample.x)
        i = sample.a - 1
        self.grams[i] += np.outer(z, z)
        self.loads[i] += sample.y * z


def default_ucb_scale(delta: float = 0.05) -> float:
    """Confidence-rule optimism level ``1 + sqrt(ln(2/delta) / 2)``.

    The classical width multiplier for a two-sided confidence band at
    level ``1 - delta``; about 2.358 at the default ``delta = 0.05``.
    """
    return 1.0 + np.sqrt(np.log(2.0 / delta) / 2.0)


class LinUCBPolicy(_LinearBanditState):
    """Optimism-in-the-face-of-uncertainty on per-arm ridge regressions.

    Chooses the arm maximizing ``theta_a' z + ucb_scale * sqrt(z' A_a^{-1} z)``
    with ties broken toward the lowest arm index.  Deterministic given
    its state, so the logged vector is one-hot.
    """

    name = "linucb"

    def __init__(self, n_actions: int, dim: int, ridge: float = 1.0, ucb_scale: float | None = None):
        super().__init__(n_actions, dim, ridge)
        self.ucb_scale = default_ucb_scale() if ucb_scale is None else ucb_scale

    def decide(self, x: np.ndarray, rng: np.random.Generator = None) -> PolicyDecision:
        z = self.augment(x)
        scores = np.empty(self.n_actions)
        for i in range(self.n_actions):
            solved = np.linalg.solve(self.grams[i], np.column_stack([self.loads[i], z]))
            scores[i] = solved[:, 0] @ z + self.ucb_scale * np.sqrt(max(z @ solved[:, 1], 0.0))
        action = int(np.argmax(scores)) + 1
        return PolicyDecision(action, _one_hot(action, self.n_actions))

    def observe(self, sample: Sample) -> None:
        self.update(sample)


def linucb_step(policy: LinUCBPolicy, x: np.ndarray) -> PolicyDecision:
    return policy.decide(x)


class LinTSPolicy(_LinearBanditState):
    """Posterior sampling on per-arm ridge regressions.

    Each arm's parameter is drawn from ``Normal(theta_a, noise_var * A_a^{-1})``
    and the best sampled payoff wins.  By default the logged vector is
    the realized one-hot choice; with ``prob_draws > 0`` the choice
    distribution is instead estimated from that many extra posterior
    draws (the acting draw included, so the realized arm always carries
    positive logged probability).
    """

    name = "lints"

    def __init__(
        self,
        n_actions: int,
        dim: int,
        ridge: float = 1.0,
        noise_var: float = 1.0,
        prob_draws: int = 0,
    ):
        super().__init__(n_actions, dim, ridge)
        self.noise_var = noise_var
        self.prob_draws = prob_draws

    def _sampled_actions(self, z: np.ndarray, rng: np.random.Generator, n_draws: int) -> np.ndarray:
        means = np.empty(self.n_actions)
        scales = np.empty((self.n_actions, self.aug_dim))
        for i in range(self.n_actions):
            chol = np.linalg.cholesky(self.grams[i])
            theta = np.linalg.solve(self.grams[i], self.loads[i])
            means[i] = theta @ z
            # z' theta_tilde = means + sqrt(noise_var) * (L^{-1} z)' eps
            scales[i] = np.linalg.solve(chol, z)
        eps = rng.standard_normal((n_draws, self.n_actions, self.aug_dim))
        payoffs = means[None, :] + np.sqrt(self.noise_var) * (eps * scales[None, :, :]).sum(axis=2)
        return payoffs.argmax(axis=1)

    def decide(self, x: np.ndarray, rng: np.random.Generator) -> PolicyDecision:
        z = self.augment(x)
        draws = self._sampled_actions(z, rng, 1 + self.prob_draws)
        action = int(draws[0]) + 1
        if self.prob_draws == 0:
            return PolicyDecision(action, _one_hot(action, self.n_actions))
        probs = np.bincount(draws, minlength=self.n_actions) / draws.size
        return PolicyDecision(action, probs)

    def observe(self, sample: Sample) -> None:
        self.update(sample)


def lints_step(policy: LinTSPolicy, x: np.ndarray, rng: np.random.Generator) -> PolicyDecision:
    return policy.decide(x, rng)


# ---------------------------------------------------------------------------
# Evaluation policy fitted from labeled draws
# ---------------------------------------------------------------------------


class FittedPolicyWeight(EvaluationWeight):
    """Evaluation weights given by a fitted softmax classifier's probabilities."""

    def __init__(self, fit: MultinomialLogisticFit, n_actions: int):
        self._fit = fit
        self.n_actions = n_actions
        self.bound = 1.0

    def vector(self, x: np.ndarray) -> np.ndarray:
        return self._fit.predict_proba(x[None, :])[0]

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        return self._fit.predict_proba(x_mat)


def fit_evaluation_policy(
    x_mat: np.ndarray,
    winners: np.ndarray,
    n_actions: int = 3,
    penalty: float = 1.0,
) -> FittedPolicyWeight:
    """Train a softmax-linear evaluation policy on (covariate, winning arm) pairs.

    ``winners`` uses 1-based arm indices.  The returned weight assigns
    each arm its predicted win probability, so weights are positive and
    sum to one at every covariate.
    """
    winners = np.asarray(winners, dtype=int)
    if winners.min() < 1 or winners.max() > n_actions:
        raise ValueError("winner labels must lie in 1..n_actions")
    fit = multinomial_logistic_fit(x_mat, winners - 1, n_actions, penalty=penalty)
    return FittedPolicyWeight(fit, n_actions)
