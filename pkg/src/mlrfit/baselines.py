"""Cross-validated ridge, lasso, and elastic-net comparators.

The L1 solvers minimize (1/2n)||Y - X b||^2 + lam * penalty by cyclic
coordinate descent with soft-thresholding. For l1_ratio=0 the elastic net
matches the closed-form ridge at lambda_ridge = n * lam.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import Dataset
from .estimators import ridge


class BaselineFamily(enum.Enum):
    RIDGE = "ridge"
    LASSO = "lasso"
    ENET = "enet"


@dataclass
class CvConfig:
    n_folds: int = 5
    lambda_grid: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    l1_ratio_grid: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        self.lambda_grid = np.asarray(self.lambda_grid, dtype=float)
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.lambda_grid.size == 0 or np.any(self.lambda_grid <= 0):
            raise ValueError("lambda_grid must be non-empty and positive")
        if np.any(np.diff(self.lambda_grid) < 0):
            raise ValueError("lambda_grid must be sorted ascending")
        if self.l1_ratio_grid is not None:
            self.l1_ratio_grid = np.asarray(self.l1_ratio_grid, dtype=float)
            if self.l1_ratio_grid.size == 0 or np.any(
                (self.l1_ratio_grid < 0) | (self.l1_ratio_grid > 1)
            ):
                raise ValueError("l1_ratio_grid entries must lie in [0, 1]")
            if np.any(np.diff(self.l1_ratio_grid) < 0):
                raise ValueError("l1_ratio_grid must be sorted ascending")


@njit(cache=True)
def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def _kkt_violation_jit(grad, beta, l1):
    viol = 0.0
    for j in range(beta.shape[0]):
        if beta[j] != 0.0:
            v = abs(grad[j] - l1 * np.sign(beta[j]))
        else:
            v = abs(grad[j]) - l1
        if v > viol:
            viol = v
    return viol


@njit(cache=True)
def _lasso_sweeps(X, Y, beta, col_sq, lam, tol, max_iter):
    n, p = X.shape
    r = Y - X @ beta
    for _ in range(max_iter):
        for j in range(p):
            if col_sq[j] == 0.0:
                beta[j] = 0.0
                continue
            old = beta[j]
            rho = np.dot(X[:, j], r) / n + col_sq[j] * old
            new = _soft(rho, lam) / col_sq[j]
            if new != old:
                r += X[:, j] * (old - new)
                beta[j] = new
        grad = X.T @ r / n
        if _kkt_violation_jit(grad, beta, lam) <= tol:
            return True
    return False


@njit(cache=True)
def _enet_sweeps(X, Y, beta, col_sq, l1, l2, tol, max_iter):
    n, p = X.shape
    r = Y - X @ beta
    for _ in range(max_iter):
        for j in range(p):
            denom = col_sq[j] + l2
            if denom == 0.0:
                beta[j] = 0.0
                continue
            old = beta[j]
            rho = np.dot(X[:, j], r) / n + col_sq[j] * old
            new = _soft(rho, l1) / denom
            if new != old:
                r += X[:, j] * (old - new)
                beta[j] = new
        grad = X.T @ r / n - l2 * beta
        if _kkt_violation_jit(grad, beta, l1) <= tol:
            return True
    return False


def lasso_cd(
    lam: float,
    X: np.ndarray,
    Y: np.ndarray,
    tol: float = 1e-5,
    max_iter: int = 10000,
    beta0: np.ndarray | None = None,
) -> np.ndarray:
    """Cyclic coordinate descent for the lasso; stops on the KKT residual.

    lam=0 is allowed and solves ordinary least squares (full-rank designs).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    # Fortran order keeps the per-column inner products contiguous
    X = np.asfortranarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float).ravel()
    n, p = X.shape
    col_sq = (X * X).sum(axis=0) / n
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if not _lasso_sweeps(X, Y, beta, col_sq, lam, tol, max_iter):
        warnings.warn(f"lasso_cd did not reach KKT tolerance {tol} in {max_iter} sweeps")
    return beta


def elastic_net_cd(
    lam: float,
    l1_ratio: float,
    X: np.ndarray,
    Y: np.ndarray,
    tol: float = 1e-5,
    max_iter: int = 10000,
    beta0: np.ndarray | None = None,
) -> np.ndarray:
    """Coordinate descent for (1/2n)||Y-Xb||^2 + lam*(a||b||_1 + (1-a)/2 ||b||^2)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError("l1_ratio must lie in [0, 1]")
    # Fortran order keeps the per-column inner products contiguous
    X = np.asfortranarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float).ravel()
    n, p = X.shape
    col_sq = (X * X).sum(axis=0) / n
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if not _enet_sweeps(
        X, Y, beta, col_sq, lam * l1_ratio, lam * (1.0 - l1_ratio), tol, max_iter
    ):
        warnings.warn(f"elastic_net_cd did not reach KKT tolerance {tol} in {max_iter} sweeps")
    return beta


def _l1_kkt_violation(grad: np.ndarray, beta: np.ndarray, l1: float) -> float:
    """Max violation of the stationarity conditions of the L1 subproblem."""
    active = beta != 0
    viol = 0.0
    if np.any(active):
        viol = float(np.max(np.abs(grad[active] - l1 * np.sign(beta[active]))))
    if np.any(~active):
        viol = max(viol, float(np.max(np.abs(grad[~active])) - l1))
    return viol


def default_lambda_grid(
    family: BaselineFamily, X: np.ndarray, Y: np.ndarray, num: int = 100
) -> np.ndarray:
    """Log-spaced grid: [1e-4, 1e4] for ridge, [1e-4*lam_max, lam_max] for L1."""
    if family is BaselineFamily.RIDGE:
        return np.logspace(-4, 4, num)
    lam_max = float(np.max(np.abs(X.T @ Y)) / X.shape[0])
    if lam_max <= 0:
        lam_max = 1.0
    return np.logspace(np.log10(lam_max) - 4, np.log10(lam_max), num)


def kfold_indices(n: int, n_folds: int, seed: int) -> list[np.ndarray]:
    """Shuffled fold partition; fold sizes differ by at most one."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(order, n_folds)]


class CvResult(NamedTuple):
    best_params: dict
    cv_curve: np.ndarray
    refit_beta: np.ndarray
    grid: list[dict]


def _fit_point(family, params, X, Y, beta0=None):
    if family is BaselineFamily.RIDGE:
        return ridge(params["lambda"], X, Y)
    if family is BaselineFamily.LASSO:
        return lasso_cd(params["lambda"], X, Y, beta0=beta0)
    return elastic_net_cd(params["lambda"], params["l1_ratio"], X, Y, beta0=beta0)


def cv_grid_search(family: BaselineFamily, d: Dataset, cfg: CvConfig) -> CvResult:
    """K-fold CV over the grid; ties go to the larger lambda; refit on all rows."""
    if d.n < cfg.n_folds:
        raise ValueError("need n >= n_folds")
    if family is BaselineFamily.ENET:
        ratios = cfg.l1_ratio_grid if cfg.l1_ratio_grid is not None else np.array([0.5])
        grid = [
            {"lambda": float(lam), "l1_ratio": float(r)}
            for r in ratios
            for lam in cfg.lambda_grid
        ]
    else:
        grid = [{"lambda": float(lam)} for lam in cfg.lambda_grid]

    folds = kfold_indices(d.n, cfg.n_folds, cfg.seed)
    for fold in folds:
        if d.n - fold.size < 2:
            raise ValueError("a training fold has fewer than 2 rows")

    errors = np.zeros((len(grid), len(folds)))
    all_idx = np.arange(d.n)
    for k, fold in enumerate(folds):
        tr = np.setdiff1d(all_idx, fold)
        Xtr, Ytr = d.X[tr], d.Y[tr]
        Xva, Yva = d.X[fold], d.Y[fold]
        warm = None
        # walk the grid from large to small lambda so warm starts are useful
        for i in sorted(range(len(grid)), key=lambda i: -grid[i]["lambda"]):
            beta = _fit_point(family, grid[i], Xtr, Ytr, beta0=warm)
            warm = beta if family is not BaselineFamily.RIDGE else None
            resid = Yva - Xva @ beta
            errors[i, k] = float(np.mean(resid * resid))
    cv_curve = errors.mean(axis=1)

    best = int(np.argmin(cv_curve))
    for i in range(len(grid)):
        if cv_curve[i] == cv_curve[best] and grid[i]["lambda"] > grid[best]["lambda"]:
            best = i
    refit_beta = _fit_point(family, grid[best], d.X, d.Y)
    return CvResult(grid[best], cv_curve, refit_beta, grid)
