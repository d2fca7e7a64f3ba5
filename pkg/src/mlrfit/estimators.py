"""Closed-form estimator families: ridge, gated-sparse, and their aggregation.

All families are differentiable in the regularization parameters, which are
kept in an unconstrained parametrization (log-space for the positive ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

LAMBDA_INIT = 1e3
KAPPA_INIT = 0.1
GATE_VARIANCE_OFFSET = 1e-2


@dataclass
class HyperParams:
    """Regularization parameters in unconstrained form.

    lambda (ridge strength) and kappa (gate sharpness) are stored as logs so
    plain gradient steps keep them positive; gamma holds per-feature gate
    scores and mu the aggregation logit.
    """

    log_lambda: float = math.log(LAMBDA_INIT)
    log_kappa: float = math.log(KAPPA_INIT)
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mu: float = 0.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        if not (np.isfinite(self.log_lambda) and np.isfinite(self.log_kappa)):
            raise ValueError("log_lambda and log_kappa must be finite")
        if not np.isfinite(self.gamma).all() or not np.isfinite(self.mu):
            raise ValueError("gamma and mu must be finite")

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa)

    @classmethod
    def default(cls, p: int) -> "HyperParams":
        return cls(gamma=np.zeros(p))


@dataclass(frozen=True)
class GateVector:
    """Per-feature gate values, each strictly inside (0, 1)."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if np.any(s <= 0) or np.any(s >= 1) or not np.isfinite(s).all():
            raise ValueError("gate entries must lie strictly in (0, 1)")
        object.__setattr__(self, "s", s)


def sigmoid(z: float) -> float:
    return float(expit(z))


def ridge(lam: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Solve (X'X + lam*I) beta = X'Y via a Cholesky factorization.

    Uses the dual n x n system when p > n; the two forms agree analytically.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if not np.isfinite(X).all() or not np.isfinite(Y).all():
        raise ValueError("non-finite inputs")
    n, p = X.shape
    if Y.shape[0] != n:
        raise ValueError("shape mismatch between X and Y")
    if p > n:
        K = X @ X.T + lam * np.eye(n)
        alpha = cho_solve(cho_factor(K, lower=True), Y)
        return X.T @ alpha
    A = X.T @ X + lam * np.eye(p)
    return cho_solve(cho_factor(A, lower=True), X.T @ Y)


def gate(kappa: float, gamma: np.ndarray, spread_mode: str = "sum") -> GateVector:
    """Quasi-sparsifying gates: sigmoids of centered gate scores.

    The sharpness multiplies the spread of gamma (plus a small offset), so
    spread-out scores sharpen the gates. ``spread_mode`` picks the spread
    statistic: "sum" (default) is the sum of squared deviations, "mean" the
    mean of squared deviations, kept for sensitivity checks.
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if spread_mode not in ("sum", "mean"):
        raise ValueError("spread_mode must be 'sum' or 'mean'")
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.size < 1:
        raise ValueError("gamma must be non-empty")
    if not np.isfinite(gamma).all():
        raise ValueError("non-finite gamma")
    dev = gamma - gamma.mean()
    spread = float(dev @ dev)
    if spread_mode == "mean":
        spread /= gamma.size
    s = expit(kappa * (spread + GATE_VARIANCE_OFFSET) * dev)
    # keep the open-interval invariant where expit rounds to 0 or 1
    return GateVector(np.clip(s, 1e-300, 1.0 - np.finfo(float).eps))


def sparse_estimator(
    lam: float, kappa: float, gamma: np.ndarray, X: np.ndarray, Y: np.ndarray
) -> np.ndarray:
    """Gate the design, ridge-solve, then gate the coefficients."""
    s = gate(kappa, gamma).s
    return s * ridge(lam, X * s, Y)


def aggregated_estimator(hp: HyperParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Sigmoid-weighted combination of the ridge and gated-sparse estimators.

    Both members share the same lambda.
    """
    w = sigmoid(hp.mu)
    beta_r = ridge(hp.lam, X, Y)
    beta_s = sparse_estimator(hp.lam, hp.kappa, hp.gamma, X, Y)
    return w * beta_r + (1.0 - w) * beta_s


def predict(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.shape[1] != beta.shape[0]:
        raise ValueError("shape mismatch between X and beta")
    return X @ beta
