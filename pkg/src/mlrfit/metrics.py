"""Evaluation statistics: R^2, estimation error, support recovery, Mann-Whitney."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

EXACT_MW_LIMIT = 8


@dataclass(frozen=True)
class SupportEstimate:
    indices: np.ndarray
    threshold: float


def estimate_support(beta_hat: np.ndarray, tau: float = 1e-3) -> SupportEstimate:
    """Coordinates whose magnitude exceeds the threshold."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    beta_hat = np.asarray(beta_hat, dtype=float)
    return SupportEstimate(np.flatnonzero(np.abs(beta_hat) > tau), tau)


def r2_score(y_true: np.ndarray, y_pred: np.ndarray, squared: bool = True) -> float:
    """Coefficient of determination.

    squared=True is the usual sum-of-squares ratio; squared=False uses the
    unsquared-norm ratio variant.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape or y_true.size < 2:
        raise ValueError("need two equal-length vectors with at least 2 entries")
    centered = y_true - y_true.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise ValueError("y_true is constant")
    resid = y_true - y_pred
    if squared:
        return 1.0 - float(resid @ resid) / denom
    return 1.0 - math.sqrt(float(resid @ resid)) / math.sqrt(denom)


def l2_error(beta_hat: np.ndarray, beta_star: np.ndarray) -> float:
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if beta_hat.shape != beta_star.shape:
        raise ValueError("length mismatch")
    return float(np.linalg.norm(beta_hat - beta_star))


def support_accuracy(beta_hat: np.ndarray, beta_star: np.ndarray, tau: float = 1e-3) -> float:
    """Fraction of coordinates correctly classified as in/out of the support."""
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if beta_hat.shape != beta_star.shape:
        raise ValueError("length mismatch")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    declared = np.abs(beta_hat) > tau
    truth = beta_star != 0
    return float(np.mean(declared == truth))


def rescale_curve(values: np.ndarray) -> np.ndarray:
    """Affine map of the sequence onto [0, 1]; min to 0, max to 1."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise ValueError("need at least 2 values")
    lo, hi = values.min(), values.max()
    if lo == hi:
        raise ValueError("constant sequence cannot be rescaled")
    return (values - lo) / (hi - lo)


def _u_statistic(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """U for sample a (midrank ties) and the pooled midranks."""
    n_a = a.size
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u_a = float(ranks[:n_a].sum()) - n_a * (n_a + 1) / 2.0
    return u_a, ranks


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided Mann-Whitney rank test.

    Exact enumeration of all rank assignments when the smaller sample has at
    most 8 points; otherwise the normal approximation with tie-corrected
    variance and a continuity correction.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = a.size, b.size
    u_a, ranks = _u_statistic(a, b)
    mid = n_a * n_b / 2.0

    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return u_a, 1.0

    if min(n_a, n_b) <= EXACT_MW_LIMIT:
        # distribution of U over all ways to pick which pooled values form sample a
        observed_dev = abs(u_a - mid)
        offset = n_a * (n_a + 1) / 2.0
        hits = 0
        total = 0
        for subset in combinations(range(n_a + n_b), n_a):
            u = float(ranks[list(subset)].sum()) - offset
            if abs(u - mid) >= observed_dev - 1e-9:
                hits += 1
            total += 1
        return u_a, hits / total

    n = n_a + n_b
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return u_a, 1.0
    z = max(abs(u_a - mid) - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return u_a, min(p, 1.0)
