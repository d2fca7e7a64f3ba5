"""Command-line experiment runner.

Subcommands: generate, fit, benchmark, curve, sweep, mwtest. A JSON config
file can supply any benchmark setting; command-line flags win over it. The
default output directory can also be set via MLRFIT_OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import Dataset
from .datagen import ScenarioSpec, generate, load_csv, load_instance, save_instance
from .experiment import (
    PER_REPETITION_COLUMNS,
    PROCEDURES,
    ExperimentConfig,
    ExperimentReport,
    run_benchmark,
    run_curve,
    run_permutation_sweep,
)
from .metrics import mann_whitney_u
from .optimizer import AdamConfig, fit_a_mlr, fit_r_mlr, fit_s_mlr

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURES = 2


def _default_output_dir() -> str:
    return os.environ.get("MLRFIT_OUTPUT_DIR", "results")


def _parse_scenarios(text: str) -> list[ScenarioSpec]:
    """Parse 'A:10,B:50' style scenario lists."""
    specs = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            name, sigma = item.split(":", 1)
            specs.append(ScenarioSpec(scenario=name.strip(), sigma=float(sigma)))
        else:
            specs.append(ScenarioSpec(scenario=item))
    return specs


def _write_csv(path: Path, rows: list[dict], columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in columns})


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _build_experiment_config(args) -> ExperimentConfig:
    raw = _load_config(args.config)
    if args.scenarios:
        raw["scenarios"] = args.scenarios
    if args.procedures:
        raw["procedures"] = args.procedures.split(",")
    if args.repetitions is not None:
        raw["repetitions"] = args.repetitions
    if args.T is not None:
        raw["T"] = args.T
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.workers is not None:
        raw["workers"] = args.workers
    raw.setdefault("output_dir", _default_output_dir())

    scenarios = raw.get("scenarios", [{"scenario": "A"}])
    if isinstance(scenarios, str):
        scenarios = _parse_scenarios(scenarios)
    else:
        scenarios = [
            s if isinstance(s, ScenarioSpec) else ScenarioSpec(**s) for s in scenarios
        ]
    raw["scenarios"] = scenarios
    adam = raw.get("adam", {})
    if not isinstance(adam, AdamConfig):
        raw["adam"] = AdamConfig(**adam)
    return ExperimentConfig(**raw)


def _report_to_json(report: ExperimentReport) -> dict:
    return {
        "per_repetition": report.per_repetition,
        "summaries": report.summaries,
        "mw_matrix": report.mw_matrix,
        "n_failures": report.n_failures,
    }


def _cmd_generate(args) -> int:
    spec = ScenarioSpec(
        scenario=args.scenario,
        sigma=args.sigma,
        n_train=args.n_train,
        n_test=args.n_test,
        p=args.p,
        seed=args.seed,
    )
    out = Path(args.out or _default_output_dir())
    for rep in range(args.repetitions):
        inst = generate(dataclasses.replace(spec, seed=spec.seed ^ rep))
        save_instance(inst, out / f"{args.scenario}_sigma{args.sigma:g}_rep{rep}")
    print(f"wrote {args.repetitions} instance(s) under {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    if args.data:
        inst = load_instance(args.data)
        train, test = inst.train, inst.test
    else:
        train, test = load_csv(args.csv, args.target, seed=args.seed)
    fit = {"R_MLR": fit_r_mlr, "S_MLR": fit_s_mlr, "A_MLR": fit_a_mlr}[args.procedure]
    res = fit(train, T=args.T, seed=args.seed)
    pred = test.X @ res.beta_hat + res.intercept
    resid = test.Y - pred
    centered = test.Y - test.Y.mean()
    r2 = 1.0 - float(resid @ resid) / float(centered @ centered)
    payload = {
        "procedure": args.procedure,
        "r2_test": r2,
        "iterations": res.iterations,
        "converged": res.converged,
        "lambda": res.theta_hat.lam,
        "aggregation_weight": res.aggregation_weight,
        "intercept": res.intercept,
        "beta_hat": res.beta_hat.tolist(),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(f"{args.procedure}: r2_test={r2:.4f} iterations={res.iterations} "
          f"converged={res.converged}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    cfg = _build_experiment_config(args)
    report = run_benchmark(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_report_to_json(report), indent=2))
    _write_csv(out / "per_repetition.csv", report.per_repetition, PER_REPETITION_COLUMNS)
    if report.summaries:
        _write_csv(out / "summary.csv", report.summaries, list(report.summaries[0].keys()))
    print(f"benchmark complete: {len(report.per_repetition)} rows, "
          f"{report.n_failures} failure(s) -> {out}")
    return EXIT_PARTIAL_FAILURES if report.n_failures else EXIT_OK


def _cmd_curve(args) -> int:
    spec = ScenarioSpec(scenario=args.scenario, sigma=args.sigma)
    rows = run_curve(spec, args.family, args.grid_size, args.seed, T=args.T)
    out = Path(args.out or _default_output_dir())
    _write_csv(out / "curves.csv", rows, list(rows[0].keys()))
    print(f"wrote {len(rows)} grid points -> {out / 'curves.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = ScenarioSpec(scenario=args.scenario, sigma=args.sigma)
    T_values = [int(t) for t in args.T_values.split(",")]
    rows = run_permutation_sweep(
        spec,
        T_values,
        repetitions=args.repetitions,
        seed=args.seed,
        procedure=args.procedure,
        include_ablation=args.ablation,
    )
    out = Path(args.out or _default_output_dir())
    _write_csv(out / "sweep.csv", rows, list(rows[0].keys()))
    print(f"wrote {len(rows)} sweep rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def _cmd_mwtest(args) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    def column(proc):
        vals = [
            float(r[args.metric])
            for r in rows
            if r["procedure"] == proc
            and (not args.scenario or r["scenario"] == args.scenario)
            and not r.get("error")
        ]
        if not vals:
            raise ValueError(f"no rows for procedure {proc!r}")
        return vals

    u, p = mann_whitney_u(column(args.proc_a), column(args.proc_b))
    print(f"U={u:g} p={p:.6g} ({args.proc_a} vs {args.proc_b}, metric={args.metric})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlrfit",
        description="Hold-out-free hyperparameter calibration experiments "
        "for linear regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic instances to disk")
    g.add_argument("--scenario", choices=["A", "B", "C"], default="A")
    g.add_argument("--sigma", type=float, default=10.0)
    g.add_argument("--n-train", type=int, default=100)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--p", type=int, default=80)
    g.add_argument("--repetitions", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_generate)

    f = sub.add_parser("fit", help="fit one procedure on one dataset")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="instance directory written by 'generate'")
    src.add_argument("--csv", help="CSV file with a header row")
    f.add_argument("--target", help="target column name (with --csv)")
    f.add_argument("--procedure", choices=["R_MLR", "S_MLR", "A_MLR"], default="R_MLR")
    f.add_argument("--T", type=int, default=30)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="write the full fit result as JSON")
    f.set_defaults(func=_cmd_fit)

    b = sub.add_parser("benchmark", help="scenarios x procedures x repetitions grid")
    b.add_argument("--config", help="JSON config file; flags override it")
    b.add_argument("--scenarios", help="e.g. 'A:10,B:50'")
    b.add_argument("--procedures", help=f"comma list from {','.join(PROCEDURES)}")
    b.add_argument("--repetitions", type=int)
    b.add_argument("--T", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--out")
    b.set_defaults(func=_cmd_benchmark)

    c = sub.add_parser("curve", help="criterion / CV / test-R2 landscape over a grid")
    c.add_argument("--scenario", choices=["A", "B", "C"], default="A")
    c.add_argument("--sigma", type=float, default=10.0)
    c.add_argument("--family", choices=["ridge", "lasso"], default="ridge")
    c.add_argument("--grid-size", type=int, default=50)
    c.add_argument("--T", type=int, default=30)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_curve)

    s = sub.add_parser("sweep", help="impact of the permutation count T")
    s.add_argument("--scenario", choices=["A", "B", "C"], default="A")
    s.add_argument("--sigma", type=float, default=10.0)
    s.add_argument("--T-values", default="1,2,5,10,30")
    s.add_argument("--repetitions", type=int, default=10)
    s.add_argument("--procedure", choices=["R_MLR", "S_MLR", "A_MLR"], default="R_MLR")
    s.add_argument("--ablation", action="store_true",
                   help="add a fit-term-only row reported as T=0")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)

    m = sub.add_parser("mwtest", help="rank test between two result columns")
    m.add_argument("--csv", required=True, help="per_repetition.csv path")
    m.add_argument("--scenario")
    m.add_argument("--metric", default="r2_test")
    m.add_argument("--proc-a", required=True)
    m.add_argument("--proc-b", required=True)
    m.set_defaults(func=_cmd_mwtest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
