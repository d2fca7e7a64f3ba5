"""Benchmark protocol: repeated data generation, fitting, scoring, reporting."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    BaselineFamily,
    CvConfig,
    cv_grid_search,
    default_lambda_grid,
    kfold_indices,
    lasso_cd,
)
from .core import Dataset, norm_n, sample_permutations, standardize
from .criterion import CriterionContext, Family, grid_select, mlr_value
from .datagen import ScenarioSpec, SyntheticInstance, generate
from .estimators import HyperParams, ridge
from .metrics import mann_whitney_u, r2_score, l2_error, rescale_curve, support_accuracy
from .optimizer import AdamConfig, FitResult, _fit_mlr, fit_a_mlr, fit_r_mlr, fit_s_mlr

PROCEDURES = (
    "R_MLR",
    "S_MLR",
    "A_MLR",
    "CV_RIDGE",
    "CV_LASSO",
    "CV_ENET",
    "GRID_MLR_RIDGE",
    "GRID_MLR_LASSO",
)

SUPPORT_TAU = 1e-3
DEFAULT_L1_RATIOS = (0.1, 0.3, 0.5, 0.7, 0.9)

PER_REPETITION_COLUMNS = (
    "scenario",
    "sigma",
    "procedure",
    "repetition",
    "r2_test",
    "l2_error",
    "support_accuracy",
    "iterations",
    "wall_seconds",
    "aggregation_weight",
    "converged",
    "error",
)


@dataclass
class ExperimentConfig:
    scenarios: list[ScenarioSpec] = field(default_factory=lambda: [ScenarioSpec()])
    procedures: list[str] = field(default_factory=lambda: ["R_MLR", "CV_RIDGE"])
    repetitions: int = 100
    adam: AdamConfig = field(default_factory=AdamConfig)
    T: int = 30
    seed: int = 0
    output_dir: str = "results"
    n_folds: int = 5
    grid_size: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.procedures:
            raise ValueError("need at least one procedure")
        for proc in self.procedures:
            if proc not in PROCEDURES:
                raise ValueError(f"unknown procedure {proc!r}")


@dataclass
class ExperimentReport:
    per_repetition: list[dict]
    summaries: list[dict]
    mw_matrix: dict
    n_failures: int


def _scenario_key(spec: ScenarioSpec) -> str:
    return f"{spec.scenario}_sigma{spec.sigma:g}"


def _score(inst: SyntheticInstance, beta: np.ndarray, intercept: float) -> dict:
    pred = inst.test.X @ beta + intercept
    return {
        "r2_test": r2_score(inst.test.Y, pred),
        "l2_error": l2_error(beta, inst.beta_star),
        "support_accuracy": support_accuracy(beta, inst.beta_star, SUPPORT_TAU),
    }


def _fit_cv_baseline(inst, family, cfg: ExperimentConfig, seed: int) -> dict:
    sd, stz = standardize(inst.train)
    lam_grid = np.sort(default_lambda_grid(family, sd.X, sd.Y, cfg.grid_size))
    cv_cfg = CvConfig(
        n_folds=cfg.n_folds,
        lambda_grid=lam_grid,
        l1_ratio_grid=np.array(DEFAULT_L1_RATIOS) if family is BaselineFamily.ENET else None,
        seed=seed,
    )
    res = cv_grid_search(family, sd, cv_cfg)
    beta, intercept = stz.coef_to_original(res.refit_beta)
    row = _score(inst, beta, intercept)
    row.update({"iterations": 0, "converged": True, "aggregation_weight": None})
    return row


def generic_mlr_curve(fit_fn, Z: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Criterion value for an arbitrary fitter: fit-term minus mean muddle-term.

    Z's first column is the true response; the rest are its permuted copies.
    """
    norms = []
    for k in range(Z.shape[1]):
        beta = fit_fn(Z[:, k], k)
        norms.append(norm_n(Z[:, k] - X @ beta))
    fit_term = norms[0]
    return fit_term - float(np.mean(norms[1:]))


def _muddled_columns(Y: np.ndarray, perms) -> np.ndarray:
    Z = np.empty((Y.shape[0], perms.T + 1))
    Z[:, 0] = Y
    for t in range(perms.T):
        Z[:, t + 1] = Y[perms.perms[t]]
    return Z


def _fit_grid_mlr_ridge(inst, cfg: ExperimentConfig, seed: int) -> dict:
    sd, stz = standardize(inst.train)
    perms = sample_permutations(sd.n, cfg.T, derangements=True, seed=seed)
    ctx = CriterionContext(sd, perms, Family.RIDGE)
    grid = [
        HyperParams(log_lambda=math.log(lam), gamma=np.zeros(sd.p))
        for lam in np.logspace(-4, 4, cfg.grid_size)
    ]
    best, _ = grid_select(ctx, grid)
    beta, intercept = stz.coef_to_original(ridge(best.lam, sd.X, sd.Y))
    row = _score(inst, beta, intercept)
    row.update({"iterations": 0, "converged": True, "aggregation_weight": None})
    return row


def _fit_grid_mlr_lasso(inst, cfg: ExperimentConfig, seed: int) -> dict:
    sd, stz = standardize(inst.train)
    perms = sample_permutations(sd.n, cfg.T, derangements=True, seed=seed)
    Z = _muddled_columns(sd.Y, perms)
    lams = np.sort(default_lambda_grid(BaselineFamily.LASSO, sd.X, sd.Y, cfg.grid_size))[::-1]
    warm = {}
    values = []
    for lam in lams:
        def fit_fn(z, k, lam=lam):
            beta = lasso_cd(lam, sd.X, z, beta0=warm.get(k))
            warm[k] = beta
            return beta

        values.append(generic_mlr_curve(fit_fn, Z, sd.X))
    values = np.array(values)
    # lams descend, so the last index among equal minima has the smallest lambda
    best = len(values) - 1 - int(np.argmin(values[::-1]))
    beta_std = lasso_cd(float(lams[best]), sd.X, sd.Y)
    beta, intercept = stz.coef_to_original(beta_std)
    row = _score(inst, beta, intercept)
    row.update({"iterations": 0, "converged": True, "aggregation_weight": None})
    return row


def _fit_procedure(proc: str, inst, cfg: ExperimentConfig, seed: int) -> dict:
    if proc in ("R_MLR", "S_MLR", "A_MLR"):
        fit = {"R_MLR": fit_r_mlr, "S_MLR": fit_s_mlr, "A_MLR": fit_a_mlr}[proc]
        res: FitResult = fit(inst.train, cfg.adam, T=cfg.T, seed=seed)
        row = _score(inst, res.beta_hat, res.intercept)
        row.update(
            {
                "iterations": res.iterations,
                "converged": res.converged,
                "aggregation_weight": res.aggregation_weight,
            }
        )
        return row
    if proc == "CV_RIDGE":
        return _fit_cv_baseline(inst, BaselineFamily.RIDGE, cfg, seed)
    if proc == "CV_LASSO":
        return _fit_cv_baseline(inst, BaselineFamily.LASSO, cfg, seed)
    if proc == "CV_ENET":
        return _fit_cv_baseline(inst, BaselineFamily.ENET, cfg, seed)
    if proc == "GRID_MLR_RIDGE":
        return _fit_grid_mlr_ridge(inst, cfg, seed)
    if proc == "GRID_MLR_LASSO":
        return _fit_grid_mlr_lasso(inst, cfg, seed)
    raise ValueError(f"unknown procedure {proc!r}")


def _run_cell(args) -> list[dict]:
    cfg, scen_idx, rep = args
    spec = cfg.scenarios[scen_idx]
    inst_seed = (cfg.seed ^ rep) + 7919 * scen_idx
    inst = generate(replace(spec, seed=inst_seed))
    key = _scenario_key(spec)
    rows = []
    for proc in cfg.procedures:
        base = {
            "scenario": key,
            "sigma": spec.sigma,
            "procedure": proc,
            "repetition": rep,
            "error": "",
        }
        start = time.perf_counter()
        try:
            row = _fit_procedure(proc, inst, cfg, seed=inst_seed + 1)
        except Exception as exc:  # record and continue with other cells
            base.update(
                {
                    "r2_test": float("nan"),
                    "l2_error": float("nan"),
                    "support_accuracy": float("nan"),
                    "iterations": 0,
                    "converged": False,
                    "aggregation_weight": None,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
        else:
            base.update(row)
        base["wall_seconds"] = time.perf_counter() - start
        rows.append(base)
    return rows


def _quartiles(values: list[float]) -> dict:
    arr = np.array(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "q25": float(np.percentile(arr, 25)),
        "q75": float(np.percentile(arr, 75)),
    }


def summarize(per_repetition: list[dict]) -> list[dict]:
    keys = sorted({(r["scenario"], r["procedure"]) for r in per_repetition})
    out = []
    for scenario, proc in keys:
        rows = [
            r
            for r in per_repetition
            if r["scenario"] == scenario and r["procedure"] == proc and not r["error"]
        ]
        entry = {"scenario": scenario, "procedure": proc, "n": len(rows)}
        for metric in ("r2_test", "l2_error", "support_accuracy", "iterations"):
            if rows:
                stats = _quartiles([r[metric] for r in rows])
            else:
                stats = {"mean": float("nan"), "median": float("nan"),
                         "q25": float("nan"), "q75": float("nan")}
            entry.update({f"{metric}_{k}": v for k, v in stats.items()})
        out.append(entry)
    return out


def mw_comparison(per_repetition: list[dict], metric: str = "r2_test") -> dict:
    """Pairwise two-sided p-values per scenario, plus the 'best' flags.

    A procedure counts as best when no other procedure with a higher median
    beats it at p < 0.05.
    """
    scenarios = sorted({r["scenario"] for r in per_repetition})
    out = {}
    for scenario in scenarios:
        procs = sorted(
            {r["procedure"] for r in per_repetition if r["scenario"] == scenario}
        )
        samples = {
            proc: [
                r[metric]
                for r in per_repetition
                if r["scenario"] == scenario and r["procedure"] == proc and not r["error"]
            ]
            for proc in procs
        }
        k = len(procs)
        pvals = [[1.0] * k for _ in range(k)]
        for i in range(k):
            for j in range(i + 1, k):
                if samples[procs[i]] and samples[procs[j]]:
                    _, p = mann_whitney_u(samples[procs[i]], samples[procs[j]])
                else:
                    p = float("nan")
                pvals[i][j] = pvals[j][i] = p
        medians = {
            proc: (float(np.median(vals)) if vals else float("-inf"))
            for proc, vals in samples.items()
        }
        best = []
        for i, proc in enumerate(procs):
            beaten = any(
                medians[other] > medians[proc] and pvals[i][j] < 0.05
                for j, other in enumerate(procs)
                if other != proc
            )
            best.append(not beaten)
        out[scenario] = {"procedures": procs, "p_values": pvals, "best": best}
    return out


def run_benchmark(cfg: ExperimentConfig) -> ExperimentReport:
    """Full scenarios x procedures x repetitions grid; failures are recorded."""
    cells = [
        (cfg, scen_idx, rep)
        for scen_idx in range(len(cfg.scenarios))
        for rep in range(cfg.repetitions)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(cell) for cell in cells]
    per_repetition = [row for chunk in chunks for row in chunk]
    per_repetition.sort(key=lambda r: (r["scenario"], r["procedure"], r["repetition"]))
    return ExperimentReport(
        per_repetition=per_repetition,
        summaries=summarize(per_repetition),
        mw_matrix=mw_comparison(per_repetition),
        n_failures=sum(1 for r in per_repetition if r["error"]),
    )


def run_curve(
    spec: ScenarioSpec,
    family: str,
    grid_size: int,
    seed: int,
    T: int = 30,
    n_folds: int = 5,
) -> list[dict]:
    """Criterion / CV-error / test-R^2 landscape over a lambda grid."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if family not in ("ridge", "lasso"):
        raise ValueError("family must be 'ridge' or 'lasso'")
    inst = generate(replace(spec, seed=seed))
    sd, stz = standardize(inst.train)
    perms = sample_permutations(sd.n, T, derangements=True, seed=seed)
    fam = BaselineFamily.RIDGE if family == "ridge" else BaselineFamily.LASSO
    lams = np.sort(default_lambda_grid(fam, sd.X, sd.Y, grid_size))
    folds = kfold_indices(sd.n, n_folds, seed)
    Z = _muddled_columns(sd.Y, perms)
    all_idx = np.arange(sd.n)

    mlr_vals, cv_vals, r2_vals = [], [], []
    ctx = CriterionContext(sd, perms, Family.RIDGE)
    for lam in lams:
        if family == "ridge":
            hp = HyperParams(log_lambda=math.log(lam), gamma=np.zeros(sd.p))
            mlr_vals.append(mlr_value(ctx, hp).value)
            beta_std = ridge(lam, sd.X, sd.Y)

            def fold_fit(Xtr, Ytr, lam=lam):
                return ridge(lam, Xtr, Ytr)

        else:
            mlr_vals.append(
                generic_mlr_curve(lambda z, k, lam=lam: lasso_cd(lam, sd.X, z), Z, sd.X)
            )
            beta_std = lasso_cd(lam, sd.X, sd.Y)

            def fold_fit(Xtr, Ytr, lam=lam):
                return lasso_cd(lam, Xtr, Ytr)

        mse = 0.0
        for fold in folds:
            tr = np.setdiff1d(all_idx, fold)
            beta_f = fold_fit(sd.X[tr], sd.Y[tr])
            resid = sd.Y[fold] - sd.X[fold] @ beta_f
            mse += float(np.mean(resid * resid))
        cv_vals.append(mse / len(folds))

        beta, intercept = stz.coef_to_original(beta_std)
        r2_vals.append(r2_score(inst.test.Y, inst.test.X @ beta + intercept))

    mlr_rs = rescale_curve(mlr_vals)
    cv_rs = rescale_curve(cv_vals)
    r2_rs = rescale_curve(r2_vals)
    i_mlr = int(np.argmin(mlr_vals))
    i_cv = int(np.argmin(cv_vals))
    i_r2 = int(np.argmax(r2_vals))
    rows = []
    for i, lam in enumerate(lams):
        rows.append(
            {
                "lambda": float(lam),
                "mlr": float(mlr_vals[i]),
                "cv_mse": float(cv_vals[i]),
                "r2_test": float(r2_vals[i]),
                "mlr_rescaled": float(mlr_rs[i]),
                "cv_rescaled": float(cv_rs[i]),
                "r2_rescaled": float(r2_rs[i]),
                "is_argmin_mlr": i == i_mlr,
                "is_argmin_cv": i == i_cv,
                "is_argmax_r2": i == i_r2,
            }
        )
    return rows


def run_permutation_sweep(
    spec: ScenarioSpec,
    T_values: list[int],
    repetitions: int,
    seed: int,
    procedure: str = "R_MLR",
    adam: AdamConfig | None = None,
    include_ablation: bool = False,
) -> list[dict]:
    """Mean/sd of test R^2 and iteration count as a function of T.

    The optional ablation row (reported as T=0) optimizes the plain fit term
    with no permuted-label counterweight.
    """
    if not T_values or any(t < 1 for t in T_values):
        raise ValueError("T_values must be non-empty with entries >= 1")
    adam = adam or AdamConfig()
    fit = {"R_MLR": fit_r_mlr, "S_MLR": fit_s_mlr, "A_MLR": fit_a_mlr}[procedure]
    family = {"R_MLR": Family.RIDGE, "S_MLR": Family.SPARSE, "A_MLR": Family.AGGREGATED}[
        procedure
    ]

    rows = []
    entries = ([0] if include_ablation else []) + list(T_values)
    for T in entries:
        r2s, iters = [], []
        for rep in range(repetitions):
            inst = generate(replace(spec, seed=seed ^ rep))
            if T == 0:
                res = _fit_mlr(
                    inst.train, adam, T=1, seed=seed ^ rep, family=family, muddle_weight=0.0
                )
            else:
                res = fit(inst.train, adam, T=T, seed=seed ^ rep)
            pred = inst.test.X @ res.beta_hat + res.intercept
            r2s.append(r2_score(inst.test.Y, pred))
            iters.append(res.iterations)
        rows.append(
            {
                "T": T,
                "r2_mean": float(np.mean(r2s)),
                "r2_sd": float(np.std(r2s, ddof=1)) if len(r2s) > 1 else 0.0,
                "iterations_mean": float(np.mean(iters)),
                "iterations_sd": float(np.std(iters, ddof=1)) if len(iters) > 1 else 0.0,
            }
        )
    return rows
