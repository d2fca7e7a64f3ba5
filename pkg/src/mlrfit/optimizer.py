"""ADAM minimization of the criterion and the three end-to-end fit procedures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, sample_permutations, standardize
from .criterion import CriterionContext, Family, mlr_value_and_grad
from .estimators import (
    GateVector,
    HyperParams,
    aggregated_estimator,
    gate,
    ridge,
    sigmoid,
    sparse_estimator,
)


@dataclass
class AdamConfig:
    """ADAM settings; defaults match the procedures' published configuration."""

    learning_rate: float = 0.5
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8
    tolerance: float = 1e-4
    max_iterations: int = 1000
    # relative change is measured against at least this magnitude, so runs that
    # end on the criterion's flat null plateau (value decaying to 0) terminate
    value_floor: float = 1e-3

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.learning_rate <= 0 or self.tolerance <= 0:
            raise ValueError("learning_rate and tolerance must be > 0")
        if self.value_floor <= 0:
            raise ValueError("value_floor must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class MinimizeResult:
    x: np.ndarray
    trace: np.ndarray
    converged: bool
    iterations: int
    initial_value: float


@dataclass
class FitResult:
    """Fitted coefficients in original units plus the calibration trail."""

    beta_hat: np.ndarray
    intercept: float
    theta_hat: HyperParams
    iterations: int
    criterion_trace: np.ndarray
    converged: bool
    gate_values: GateVector | None = None
    aggregation_weight: float | None = None


def adam_minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    cfg: AdamConfig,
) -> MinimizeResult:
    """Standard ADAM with bias correction.

    Stops when the relative change of the objective value between consecutive
    iterates falls below the tolerance, or at the iteration cap.
    """
    x = np.asarray(x0, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    val, grad = objective(x)
    if not np.isfinite(val) or not np.isfinite(grad).all():
        raise FloatingPointError("non-finite objective value or gradient at start")
    initial_value = val
    trace = []
    converged = False
    for t in range(1, cfg.max_iterations + 1):
        m = cfg.beta1 * m + (1 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad
        m_hat = m / (1 - cfg.beta1**t)
        v_hat = v / (1 - cfg.beta2**t)
        x = x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        new_val, grad = objective(x)
        if not np.isfinite(new_val) or not np.isfinite(grad).all():
            raise FloatingPointError(f"non-finite objective at iteration {t}")
        trace.append(new_val)
        if abs(new_val - val) < cfg.tolerance * max(abs(val), cfg.value_floor):
            converged = True
            val = new_val
            break
        val = new_val
    return MinimizeResult(x, np.array(trace), converged, len(trace), initial_value)


def _fit_mlr(
    d: Dataset,
    cfg: AdamConfig,
    T: int,
    seed: int,
    family: Family,
    train_kappa: bool = True,
    freeze_mu: float | None = None,
    standardize_x: bool = True,
    muddle_weight: float = 1.0,
) -> FitResult:
    sd, stz = standardize(d, with_x=standardize_x)
    perms = sample_permutations(sd.n, T, derangements=True, seed=seed)
    ctx = CriterionContext(sd, perms, family)
    p = sd.p
    hp0 = HyperParams.default(p)
    if freeze_mu is not None:
        hp0.mu = freeze_mu

    # parameter packing per family; frozen coordinates stay at their defaults
    use_gate = family in (Family.SPARSE, Family.AGGREGATED)
    use_mu = family is Family.AGGREGATED and freeze_mu is None

    def unpack(x: np.ndarray) -> HyperParams:
        hp = HyperParams(hp0.log_lambda, hp0.log_kappa, hp0.gamma.copy(), hp0.mu)
        i = 0
        hp.log_lambda = x[i]
        i += 1
        if use_gate and train_kappa:
            hp.log_kappa = x[i]
            i += 1
        if use_gate:
            hp.gamma = x[i : i + p].copy()
            i += p
        if use_mu:
            hp.mu = x[i]
        return hp

    def pack_grad(g) -> np.ndarray:
        parts = [np.array([g.log_lambda])]
        if use_gate and train_kappa:
            parts.append(np.array([g.log_kappa]))
        if use_gate:
            parts.append(g.gamma)
        if use_mu:
            parts.append(np.array([g.mu]))
        return np.concatenate(parts)

    x0_parts = [np.array([hp0.log_lambda])]
    if use_gate and train_kappa:
        x0_parts.append(np.array([hp0.log_kappa]))
    if use_gate:
        x0_parts.append(hp0.gamma)
    if use_mu:
        x0_parts.append(np.array([hp0.mu]))
    x0 = np.concatenate(x0_parts)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        ev, grad = mlr_value_and_grad(ctx, unpack(x), muddle_weight=muddle_weight)
        return ev.value, pack_grad(grad)

    res = adam_minimize(objective, x0, cfg)
    hp_hat = unpack(res.x)

    if family is Family.RIDGE:
        beta_std = ridge(hp_hat.lam, sd.X, sd.Y)
    elif family is Family.SPARSE:
        beta_std = sparse_estimator(hp_hat.lam, hp_hat.kappa, hp_hat.gamma, sd.X, sd.Y)
    else:
        beta_std = aggregated_estimator(hp_hat, sd.X, sd.Y)
    beta, intercept = stz.coef_to_original(beta_std)

    return FitResult(
        beta_hat=beta,
        intercept=intercept,
        theta_hat=hp_hat,
        iterations=res.iterations,
        criterion_trace=res.trace,
        converged=res.converged,
        gate_values=gate(hp_hat.kappa, hp_hat.gamma) if use_gate else None,
        aggregation_weight=sigmoid(hp_hat.mu) if family is Family.AGGREGATED else None,
    )


def fit_r_mlr(
    d: Dataset,
    cfg: AdamConfig | None = None,
    T: int = 30,
    seed: int = 0,
    standardize_x: bool = True,
) -> FitResult:
    """Calibrate the ridge strength by gradient descent on the criterion."""
    return _fit_mlr(d, cfg or AdamConfig(), T, seed, Family.RIDGE, standardize_x=standardize_x)


def fit_s_mlr(
    d: Dataset,
    cfg: AdamConfig | None = None,
    T: int = 30,
    seed: int = 0,
    train_kappa: bool = True,
    standardize_x: bool = True,
) -> FitResult:
    """Fit the gated-sparse family, training (log_lambda, log_kappa, gamma)."""
    return _fit_mlr(
        d, cfg or AdamConfig(), T, seed, Family.SPARSE,
        train_kappa=train_kappa, standardize_x=standardize_x,
    )


def fit_a_mlr(
    d: Dataset,
    cfg: AdamConfig | None = None,
    T: int = 30,
    seed: int = 0,
    train_kappa: bool = True,
    freeze_mu: float | None = None,
    standardize_x: bool = True,
) -> FitResult:
    """Fit the aggregated family; the trained sigmoid weight selects a member."""
    return _fit_mlr(
        d, cfg or AdamConfig(), T, seed, Family.AGGREGATED,
        train_kappa=train_kappa, freeze_mu=freeze_mu, standardize_x=standardize_x,
    )
