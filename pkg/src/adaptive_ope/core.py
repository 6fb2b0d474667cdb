"""Shared data types for adaptively collected bandit data.

Actions are 1-based integers ``1..K``.  A covariate is a plain numpy
vector; covariate-free problems use vectors of length zero.  Logged data
is an append-only :class:`History` of :class:`Sample` records, and every
estimator in the package consumes histories through read-only prefixes,
never through future samples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

PROB_SUM_TOL = 1e-9


class ConfigurationError(ValueError):
    """A requested combination of components cannot be assembled."""


class DeficientSupportError(RuntimeError):
    """A realized action carries zero logged probability under the divisor."""


def _as_covariate(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"covariate must be a 1-d vector, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Sample:
    """One logged interaction: covariate, chosen action, observed outcome.

    ``logged_policy`` optionally records the probability vector the logging
    policy assigned over all actions at this covariate (one-hot for
    deterministic rules).  Estimators that invert the true logging
    propensity require it; purely model-based estimators do not.
    """

    x: np.ndarray
    a: int
    y: float
    logged_policy: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", _as_covariate(self.x))
        if self.a < 1:
            raise ValueError(f"action index must be >= 1, got {self.a}")
        if not np.isfinite(self.y):
            raise ValueError(f"outcome must be finite, got {self.y}")
        if self.logged_policy is not None:
            p = np.asarray(self.logged_policy, dtype=float)
            if p.ndim != 1 or self.a > p.shape[0]:
                raise ValueError("logged_policy must cover the realized action")
            if np.any(p < 0.0) or np.any(p > 1.0):
                raise ValueError("logged_policy entries must lie in [0, 1]")
            if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
                raise ValueError(
                    f"logged_policy must sum to 1 within {PROB_SUM_TOL}, got {p.sum()!r}"
                )
            object.__setattr__(self, "logged_policy", p)


class History:
    """Append-only ordered record of samples.

    Supports ``len``, iteration, integer indexing, and prefix views.
    Array accessors return fresh arrays laid out per period, which is the
    layout the estimators vectorize over.
    """

    def __init__(self, samples: Sequence[Sample] = ()):
        self._samples: list[Sample] = list(samples)

    def append(self, sample: Sample) -> None:
        self._samples.append(sample)

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    def __getitem__(self, i: int) -> Sample:
        return self._samples[i]

    def prefix(self, t: int) -> "History":
        """The first ``t`` samples as a new history (0 <= t <= len)."""
        if not 0 <= t <= len(self._samples):
            raise IndexError(f"prefix length {t} outside [0, {len(self._samples)}]")
        return History(self._samples[:t])

    # -- array accessors ------------------------------------------------

    def actions(self) -> np.ndarray:
        return np.array([s.a for s in self._samples], dtype=int)

    def outcomes(self) -> np.ndarray:
        return np.array([s.y for s in self._samples], dtype=float)

    def covariates(self) -> np.ndarray:
        if not self._samples:
            return np.zeros((0, 0))
        return np.stack([s.x for s in self._samples])

    def logged_policies(self) -> np.ndarray:
        """Stacked logged probability vectors; raises if any are missing."""
        rows = []
        for t, s in enumerate(self._samples):
            if s.logged_policy is None:
                raise ValueError(f"sample {t + 1} has no logged_policy")
            rows.append(s.logged_policy)
        return np.stack(rows) if rows else np.zeros((0, 0))


def history_prefix(history: History, t: int) -> History:
    """First ``t`` samples of ``history`` as a read-only view."""
    return history.prefix(t)


class EvaluationWeight:
    """Weight placed on each action's outcome by the target of estimation.

    Subclasses implement :meth:`vector`.  For a stochastic evaluation
    policy the weights are its action probabilities; for a treatment
    contrast they may be signed.  ``bound`` is the configured cap on
    ``|weight|`` used by contract checks downstream.
    """

    n_actions: int
    bound: float

    def vector(self, x: np.ndarray) -> np.ndarray:
        """Weights over all actions at covariate ``x``, shape (K,)."""
        raise NotImplementedError

    def weight(self, a: int, x: np.ndarray) -> float:
        if not 1 <= a <= self.n_actions:
            raise ValueError(f"action {a} outside 1..{self.n_actions}")
        return float(self.vector(x)[a - 1])

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        """Weights for a batch of covariate rows, shape (n, K)."""
        return np.stack([self.vector(row) for row in np.atleast_2d(x_mat)])


class FixedVectorWeight(EvaluationWeight):
    """Covariate-independent weights, one per action."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty vector")
        self._w = w
        self.n_actions = w.size
        self.bound = float(np.max(np.abs(w)))

    def vector(self, x: np.ndarray) -> np.ndarray:
        return self._w

    def matrix(self, x_mat: np.ndarray) -> np.ndarray:
        return np.tile(self._w, (np.atleast_2d(x_mat).shape[0], 1))


def ate_weight() -> EvaluationWeight:
    """Treatment-effect contrast for a two-armed problem: -1 on arm 1, +1 on arm 2.

    The estimand it induces is ``E[Y(2)] - E[Y(1)]``.
    """
    return FixedVectorWeight([-1.0, 1.0])


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class EstimateReport:
    """An estimate with its per-period scores and normal-theory interval.

    ``scores`` are the per-period terms whose running mean is the
    estimate; they are stored uncentered, and centering is the job of the
    inference helpers.
    """

    estimate: float
    scores: np.ndarray = field(repr=False)
    variance: float
    ci: ConfidenceInterval
    level: float
    kind: str = ""


def check_outcome_bound(y: float, bound: float, hard: bool) -> None:
    """Enforce a configured outcome bound.

    Hard bounds (known-bounded outcomes) raise; soft bounds warn once per
    call site, which is the behaviour wanted for nominally unbounded
    draws that exceed the working range.
    """
    if abs(y) <= bound:
        return
    msg = f"outcome {y} exceeds configured bound {bound}"
    if hard:
        raise ValueError(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
