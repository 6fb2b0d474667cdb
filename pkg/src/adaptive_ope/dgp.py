"""Synthetic data-generating processes and their oracle quantities.

Two worlds are provided: a covariate-free two-armed Gaussian problem
whose oracle conditional means/variances are known in closed form, and a
ten-dimensional contextual problem whose three arms compete through a
softmax of fixed score functions, with exactly one arm paying out per
round.
"""

from __future__ import annotations

import numpy as np
from scipy.special import softmax

from .core import EvaluationWeight

_TRUTH_STREAM = 0x7521


class GaussianTwoArmDGP:
    """Two arms, no covariates, ``Y(a) ~ Normal(mean_a, var_a)``.

    Defaults put mean and variance both equal to the arm index, so the
    treatment contrast (arm 2 minus arm 1) is exactly 1.
    """

    def __init__(self, means=(1.0, 2.0), variances=(1.0, 2.0)):
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        if self.means.shape != self.variances.shape or self.means.ndim != 1:
            raise ValueError("means and variances must be equal-length vectors")
        if np.any(self.variances <= 0.0):
            raise ValueError("arm variances must be positive")
        self.n_actions = self.means.size
        self.dim = 0
        self.outcome_bound = 12.0
        self.hard_bound = False
        self.seed: int | None = None

    def draw_covariate(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(0)

    def draw_potential_outcomes(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.means, np.sqrt(self.variances))

    def f_star(self, x: np.ndarray) -> np.ndarray:
        """Oracle conditional mean of each arm's outcome."""
        return self.means

    def v_star(self, x: np.ndarray) -> np.ndarray:
        """Oracle conditional variance of each arm's outcome."""
        return self.variances


class SoftmaxContextualDGP:
    """Three arms on 10-d standard-normal covariates, one-hot outcomes.

    A sign vector ``w`` in {-1, +1}^d is fixed at construction.  Arm
    scores are ``sum(x)``, ``sum(w * x^2)`` and ``sum(w * |x|)``; a single
    winning arm is drawn from the softmax of the scores, and ``Y(a)``
    is the indicator that arm ``a`` won, so outcomes sum to one exactly.
    """

    def __init__(self, signs):
        w = np.asarray(signs, dtype=float)
        if w.ndim != 1 or not np.all(np.isin(w, (-1.0, 1.0))):
            raise ValueError("signs must be a vector of -1/+1 entries")
        self.signs = w
        self.n_actions = 3
        self.dim = w.size
        self.outcome_bound = 1.0
        self.hard_bound = True
        self.seed: int | None = None

    @classmethod
    def from_seed(cls, seed: int, dim: int = 10) -> "SoftmaxContextualDGP":
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5167)))
        dgp = cls(rng.choice([-1.0, 1.0], size=dim))
        dgp.seed = int(seed)
        return dgp

    def scores(self, x_mat: np.ndarray) -> np.ndarray:
        """Arm scores for a batch of covariate rows, shape (n, 3)."""
        x_mat = np.atleast_2d(x_mat)
        return np.stack(
            [
                x_mat.sum(axis=1),
                (self.signs * x_mat**2).sum(axis=1),
                (self.signs * np.abs(x_mat)).sum(axis=1),
            ],
            axis=1,
        )

    def winner_probs(self, x_mat: np.ndarray) -> np.ndarray:
        return softmax(self.scores(x_mat), axis=1)

    def draw_covariate(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim)

    def draw_potential_outcomes(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        probs = self.winner_probs(x[None, :])[0]
        winner = rng.choice(self.n_actions, p=probs)
        out = np.zeros(self.n_actions)
        out[winner] = 1.0
        return out

    def f_star(self, x: np.ndarray) -> np.ndarray:
        """Oracle conditional outcome means: the winner probabilities."""
        return self.winner_probs(x[None, :])[0]


def _weight_matrix(weight: EvaluationWeight, x_mat: np.ndarray) -> np.ndarray:
    matrix = getattr(weight, "matrix", None)
    if matrix is not None:
        return matrix(x_mat)
    return np.stack([weight.vector(row) for row in x_mat])


def true_value(
    dgp,
    weight: EvaluationWeight,
    oracle_budget: int = 100_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Target mean outcome ``E[sum_a w(a|X) f*(a, X)]`` for ``weight``.

    Closed form for covariate-free worlds; otherwise a Monte Carlo
    average of the oracle conditional means over ``oracle_budget`` fresh
    covariate draws, seeded deterministically from the DGP so repeated
    calls agree bit for bit.
    """
    if weight.n_actions != dgp.n_actions:
        raise ValueError(
            f"weight covers {weight.n_actions} actions, DGP has {dgp.n_actions}"
        )
    if dgp.dim == 0:
        w = weight.vector(np.zeros(0))
        return float(w @ dgp.f_star(np.zeros(0)))
    if oracle_budget < 1:
        raise ValueError("oracle_budget must be at least 1")
    if rng is None:
        entropy = dgp.seed if dgp.seed is not None else 0
        rng = np.random.default_rng(np.random.SeedSequence((int(entropy), _TRUTH_STREAM)))
    x_mat = rng.standard_normal((oracle_budget, dgp.dim))
    w_mat = _weight_matrix(weight, x_mat)
    return float(np.mean(np.sum(w_mat * dgp.winner_probs(x_mat), axis=1)))


def semiparametric_bound(dgp: GaussianTwoArmDGP, weight: EvaluationWeight, alpha) -> float:
    """Asymptotic variance floor of the target under logging allocation ``alpha``.

    Only available where the oracle means and variances are covariate-free
    constants.  ``alpha`` is a probability vector over the arms with
    strictly positive entries.
    """
    if dgp.dim != 0:
        raise ValueError("analytic variance bound requires a covariate-free DGP")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (dgp.n_actions,):
        raise ValueError(f"alpha must have shape ({dgp.n_actions},)")
    if np.any(alpha <= 0.0):
        raise ValueError("alpha entries must be strictly positive")
    if abs(float(alpha.sum()) - 1.0) > 1e-6:
        raise ValueError("alpha must sum to 1")
    x0 = np.zeros(0)
    w = weight.vector(x0)
    f = dgp.f_star(x0)
    v = dgp.v_star(x0)
    target = float(w @ f)
    return float(np.sum(w**2 * v / alpha) + (float(w @ f) - target) ** 2)
