"""The muddled-label calibration criterion: value, analytic gradient, grid search.

The criterion is the residual norm on the true labels minus the mean residual
norm over T label-permuted copies; hyperparameters are calibrated by driving
it down, with no held-out split.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .core import Dataset, PermutationSet
from .estimators import GATE_VARIANCE_OFFSET, HyperParams

DEGENERATE_NORM = 1e-12


class Family(enum.Enum):
    RIDGE = "ridge"
    SPARSE = "sparse"
    AGGREGATED = "aggregated"


@dataclass(frozen=True)
class CriterionContext:
    """Standardized dataset, fixed permutation batch, and estimator family."""

    dataset: Dataset
    perms: PermutationSet
    family: Family

    def __post_init__(self):
        if self.perms.n != self.dataset.n:
            raise ValueError("permutation length does not match dataset rows")
        if not isinstance(self.family, Family):
            raise ValueError(f"unknown family: {self.family!r}")


@dataclass(frozen=True)
class CriterionEval:
    value: float
    fit_term: float
    muddle_term: float


@dataclass
class CriterionGradient:
    """Gradient in the unconstrained parametrization (log_lambda, log_kappa, gamma, mu)."""

    log_lambda: float
    log_kappa: float
    gamma: np.ndarray
    mu: float
    degenerate: bool = False


def _gate_values(kappa: float, gamma: np.ndarray):
    dev = gamma - gamma.mean()
    spread = float(dev @ dev)
    scale = spread + GATE_VARIANCE_OFFSET
    s = expit(kappa * scale * dev)
    return s, dev, scale


def _evaluate(ctx, hp, need_grad, muddle_weight=1.0):
    X = ctx.dataset.X
    Y = ctx.dataset.Y
    n, p = X.shape
    perms = ctx.perms.perms
    T = perms.shape[0]

    # columns: [Y, pi^1(Y), ..., pi^T(Y)]
    Z = np.empty((n, T + 1))
    Z[:, 0] = Y
    for t in range(T):
        Z[:, t + 1] = Y[perms[t]]
    G = X.T @ X
    XtZ = X.T @ Z
    lam = hp.lam
    eye = np.eye(p)
    family = ctx.family

    ridge_branch = family in (Family.RIDGE, Family.AGGREGATED)
    sparse_branch = family in (Family.SPARSE, Family.AGGREGATED)

    if ridge_branch:
        cR = cho_factor(G + lam * eye, lower=True)
        BR = cho_solve(cR, XtZ)
        YhR = X @ BR
    if sparse_branch:
        kappa = hp.kappa
        if hp.gamma.shape[0] != p:
            raise ValueError("gamma length does not match p")
        s, dev, scale = _gate_values(kappa, hp.gamma)
        cS = cho_factor(G * np.outer(s, s) + lam * eye, lower=True)
        BS = cho_solve(cS, s[:, None] * XtZ)
        YhS = (X * s) @ BS

    if family is Family.RIDGE:
        Yh = YhR
    elif family is Family.SPARSE:
        Yh = YhS
    else:
        w_mu = float(expit(hp.mu))
        Yh = w_mu * YhR + (1.0 - w_mu) * YhS

    R = Z - Yh
    g = np.sqrt(np.mean(R * R, axis=0))
    fit_term = float(g[0])
    muddle_term = float(g[1:].mean())
    ev = CriterionEval(fit_term - muddle_weight * muddle_term, fit_term, muddle_term)
    if not need_grad:
        return ev, None

    wts = np.concatenate(([1.0], np.full(T, -muddle_weight / T)))
    degenerate = bool(np.any(g < DEGENERATE_NORM))
    with np.errstate(divide="ignore"):
        inv_g = np.where(g < DEGENERATE_NORM, 0.0, 1.0 / g)
    # d(value)/d(Yh), column by column
    Uw = -R * (wts * inv_g / n)

    d_lam = 0.0
    d_kappa = 0.0
    d_gamma = np.zeros(p)
    d_mu = 0.0

    if family is Family.AGGREGATED:
        wR, wS = w_mu, 1.0 - w_mu
        d_mu = float(np.sum(Uw * (YhR - YhS))) * w_mu * (1.0 - w_mu)
    elif family is Family.RIDGE:
        wR, wS = 1.0, 0.0
    else:
        wR, wS = 0.0, 1.0

    if ridge_branch and wR != 0.0:
        VR = cho_solve(cR, X.T @ Uw)
        d_lam += -wR * float(np.sum(VR * BR))
    if sparse_branch and wS != 0.0:
        XtU = X.T @ Uw
        VS = cho_solve(cS, s[:, None] * XtU)
        d_lam += -wS * float(np.sum(VS * BS))
        # adjoint of the gated design through both the solve and the prediction
        grad_s = wS * np.sum(
            BS * (XtU - G @ (s[:, None] * VS)) + VS * (XtZ - G @ (s[:, None] * BS)),
            axis=1,
        )
        q = grad_s * s * (1.0 - s)
        d_kappa = scale * float(q @ dev)
        d_gamma = kappa * (2.0 * dev * float(q @ dev) + scale * (q - q.mean()))

    grad = CriterionGradient(
        log_lambda=lam * d_lam,
        log_kappa=(hp.kappa * d_kappa) if sparse_branch else 0.0,
        gamma=d_gamma,
        mu=d_mu,
        degenerate=degenerate,
    )
    return ev, grad


def mlr_value(ctx: CriterionContext, hp: HyperParams) -> CriterionEval:
    """Evaluate the criterion for the context's estimator family."""
    ev, _ = _evaluate(ctx, hp, need_grad=False)
    return ev


def mlr_gradient(ctx: CriterionContext, hp: HyperParams) -> CriterionGradient:
    """Analytic gradient of :func:`mlr_value` in the unconstrained parametrization.

    Residual norms below the degeneracy cutoff contribute a zero subgradient
    and set the ``degenerate`` flag.
    """
    _, grad = _evaluate(ctx, hp, need_grad=True)
    return grad


def mlr_value_and_grad(
    ctx: CriterionContext, hp: HyperParams, muddle_weight: float = 1.0
) -> tuple[CriterionEval, CriterionGradient]:
    """Value and gradient in one pass, sharing the factorizations.

    ``muddle_weight`` scales the permuted-label term; 0 gives the plain
    empirical-fit ablation used in diagnostics.
    """
    return _evaluate(ctx, hp, need_grad=True, muddle_weight=muddle_weight)


def finite_difference_gradient(
    ctx: CriterionContext, hp: HyperParams, h: float = 1e-5
) -> CriterionGradient:
    """Central-difference gradient; debug oracle, not for production fitting."""
    p = hp.gamma.shape[0]
    x0 = np.concatenate(([hp.log_lambda, hp.log_kappa], hp.gamma, [hp.mu]))

    def value_at(x):
        hp_x = HyperParams(x[0], x[1], x[2 : 2 + p].copy(), x[2 + p])
        return mlr_value(ctx, hp_x).value

    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (value_at(xp) - value_at(xm)) / (2 * h)
    return CriterionGradient(g[0], g[1], g[2 : 2 + p], g[2 + p])


def grid_select(
    ctx: CriterionContext, grid: list[HyperParams]
) -> tuple[HyperParams, np.ndarray]:
    """Argmin of the criterion over a hyperparameter grid.

    Returns the winning parameters and the full value curve; exact ties go to
    the smallest lambda (strongest regularization among the minima).
    """
    if len(grid) == 0:
        raise ValueError("empty grid")
    curve = np.array([mlr_value(ctx, hp).value for hp in grid])
    best = int(np.argmin(curve))
    for i in range(len(grid)):
        if curve[i] == curve[best] and grid[i].lam < grid[best].lam:
            best = i
    return grid[best], curve
