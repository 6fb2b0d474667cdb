"""Kernel and linear solvers shared by the nuisance and policy layers.

Everything here is plain penalized regression: Gaussian-kernel ridge
least squares, Gaussian-kernel multiclass ridge logistic regression (via
the representer expansion), and linear multinomial logistic regression.
Covariate-free problems (``d == 0``) degenerate to an all-ones kernel,
for which closed forms / tiny Newton solves are used; those fast paths
are algebraically exact reductions, not approximations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``."""
    a2 = np.sum(a * a, axis=1)[:, None]
    b2 = np.sum(b * b, axis=1)[None, :]
    d2 = a2 + b2 - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def gaussian_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a_i - b_j||^2)``; an all-ones matrix when d == 0."""
    if gamma <= 0.0:
        raise ValueError(f"kernel scale gamma must be positive, got {gamma}")
    if a.shape[1] == 0:
        return np.ones((a.shape[0], b.shape[0]))
    return np.exp(-gamma * pairwise_sq_dists(a, b))


# ---------------------------------------------------------------------------
# Kernel ridge least squares
# ---------------------------------------------------------------------------


@dataclass
class KernelRidgeFit:
    """Centered dual-form ridge fit.

    ``predict(x) = ybar + k(x, X)^T (K + lam I)^{-1} (y - ybar)``: the
    training mean enters unpenalized, so regularization shrinks toward
    the mean rather than toward zero.
    """

    x_train: np.ndarray
    dual_coef: np.ndarray
    gamma: float
    lam: float
    offset: float = 0.0
    constant: float | None = None  # covariate-free closed form

    def predict(self, x_query: np.ndarray) -> np.ndarray:
        x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
        if self.constant is not None:
            return np.full(x_query.shape[0], self.constant)
        k = gaussian_kernel(x_query, self.x_train, self.gamma)
        return self.offset + k @ self.dual_coef


def kernel_ridge_fit(x: np.ndarray, y: np.ndarray, lam: float, gamma: float) -> KernelRidgeFit:
    """Fit Gaussian-kernel ridge regression of ``y`` on rows of ``x``.

    Minimizes ``sum (y_i - ybar - h(x_i))^2 + lam * ||h||^2`` over RKHS
    deviations ``h`` from the unpenalized training mean ``ybar``.  With
    zero-length covariates the deviations cancel exactly (the all-ones
    kernel shares one inverse direction with the centered targets), so
    the predictor collapses to the constant ``ybar``.
    """
    if lam <= 0.0:
        raise ValueError(f"ridge penalty lam must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n == 0:
        raise ValueError("kernel ridge requires at least one training sample")
    ybar = float(y.mean())
    if x.shape[1] == 0:
        return KernelRidgeFit(x, np.zeros(n), gamma, lam, constant=ybar)
    kmat = gaussian_kernel(x, x, gamma)
    kmat[np.diag_indices_from(kmat)] += lam
    dual = np.linalg.solve(kmat, y - ybar)
    return KernelRidgeFit(x, dual, gamma, lam, offset=ybar)


# ---------------------------------------------------------------------------
# Kernel multiclass ridge logistic regression
# ---------------------------------------------------------------------------


@dataclass
class KernelLogisticFit:
    """Representer-form softmax fit: scores at x are ``k(x, X) @ coef``."""

    x_train: np.ndarray
    coef: np.ndarray  # (n, K)
    gamma: float
    lam: float
    intercepts: np.ndarray | None = None  # covariate-free closed path, (K,)

    @property
    def n_classes(self) -> int:
        return self.intercepts.shape[0] if self.intercepts is not None else self.coef.shape[1]

    def predict_proba(self, x_query: np.ndarray) -> np.ndarray:
        x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
        if self.intercepts is not None:
            row = softmax(self.intercepts)
            return np.tile(row, (x_query.shape[0], 1))
        scores = gaussian_kernel(x_query, self.x_train, self.gamma) @ self.coef
        return softmax(scores, axis=1)


def _intercept_only_logistic(labels: np.ndarray, n_classes: int, lam: float) -> np.ndarray:
    """Newton solve of ``-sum_k n_k b_k + n*LSE(b) + lam/2 ||b||^2`` over b."""
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    n = counts.sum()
    beta = np.zeros(n_classes)
    for _ in range(50):
        p = softmax(beta)
        grad = -counts + n * p + lam * beta
        hess = n * (np.diag(p) - np.outer(p, p)) + lam * np.eye(n_classes)
        step = np.linalg.solve(hess, grad)
        beta -= step
        if np.max(np.abs(step)) < 1e-12:
            break
    return beta


def kernel_logistic_fit(
    x: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    lam: float,
    gamma: float,
    coef0: np.ndarray | None = None,
    max_iter: int = 200,
) -> KernelLogisticFit:
    """Fit multiclass kernel logistic regression with an RKHS ridge penalty.

    Minimizes ``sum_i CE(softmax((K C)_i), a_i) + lam/2 * tr(C^T K C)``
    over the representer coefficients ``C``; the covariate-free case is
    solved exactly as a penalized intercept-only model, to which the
    all-ones-kernel objective reduces.
    """
    if lam <= 0.0:
        raise ValueError(f"ridge penalty lam must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = x.shape[0]
    if n == 0:
        raise ValueError("kernel logistic regression requires at least one sample")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels must lie in [0, n_classes)")
    if x.shape[1] == 0:
        beta = _intercept_only_logistic(labels, n_classes, lam)
        return KernelLogisticFit(x, np.zeros((n, n_classes)), gamma, lam, intercepts=beta)

    kmat = gaussian_kernel(x, x, gamma)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    def objective(flat: np.ndarray):
        c = flat.reshape(n, n_classes)
        scores = kmat @ c
        ce = logsumexp(scores, axis=1) - scores[np.arange(n), labels]
        penalty = 0.5 * lam * float(np.sum(c * scores))  # tr(C^T K C)
        value = (ce.sum() + penalty) / n
        probs = softmax(scores, axis=1)
        grad = kmat @ (probs - onehot + lam * c) / n
        return value, grad.ravel()

    start = coef0.ravel() if coef0 is not None else np.zeros(n * n_classes)
    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-7},
    )
    return KernelLogisticFit(x, result.x.reshape(n, n_classes), gamma, lam)


# ---------------------------------------------------------------------------
# Linear multinomial logistic regression
# ---------------------------------------------------------------------------


@dataclass
class MultinomialLogisticFit:
    """Softmax-linear classifier with an unpenalized intercept row."""

    coef: np.ndarray  # (d, K)
    intercept: np.ndarray  # (K,)

    def predict_proba(self, x_query: np.ndarray) -> np.ndarray:
        x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
        return softmax(x_query @ self.coef + self.intercept, axis=1)


def multinomial_logistic_fit(
    x: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    penalty: float = 1.0,
    max_iter: int = 500,
) -> MultinomialLogisticFit:
    """L2-penalized multinomial logistic regression on raw features."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, d = x.shape
    if n == 0:
        raise ValueError("logistic regression requires at least one sample")
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    def unpack(flat):
        w = flat[: d * n_classes].reshape(d, n_classes)
        b = flat[d * n_classes :]
        return w, b

    def objective(flat: np.ndarray):
        w, b = unpack(flat)
        scores = x @ w + b
        ce = logsumexp(scores, axis=1) - scores[np.arange(n), labels]
        value = (ce.sum() + 0.5 * penalty * float(np.sum(w * w))) / n
        probs = softmax(scores, axis=1)
        resid = probs - onehot
        grad_w = (x.T @ resid + penalty * w) / n
        grad_b = resid.sum(axis=0) / n
        return value, np.concatenate([grad_w.ravel(), grad_b])

    result = minimize(
        objective,
        np.zeros(d * n_classes + n_classes),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-8},
    )
    w, b = unpack(result.x)
    return MultinomialLogisticFit(w, b)
