"""Command line entry point: ``farboot {simulate,estimate,bootstrap,experiment,check}``.

Exit codes: 0 success, 1 failed checks, 2 bad configuration or arguments,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from farboot.ar_bootstrap import BootstrapDraw, extract_residuals, generate_pseudo_batch
from farboot.checks import run_checks
from farboot.config import ExperimentConfig, config_to_text, load_config
from farboot.errors import ConfigurationError, DegenerateSampleError, NumericalError
from farboot.experiments import (
    build_setup,
    estimator_config,
    probe_set,
    resolve_q,
    run_consistency_experiment,
    run_distribution_experiment,
    run_mallows_experiment,
    stream,
)
from farboot.function_space import GridFunction
from farboot.kernel_regression import FittedEstimator
from farboot.outputs import (
    read_series_csv,
    write_consistency_csv,
    write_distribution_samples,
    write_draw,
    write_json,
    write_mallows_csv,
    write_predictions_csv,
    write_series_csv,
)
from farboot.process_models import FunctionalSeries, simulate_far1_batch

log = logging.getLogger("farboot")

# stream roles used only by the CLI, disjoint from the experiment roles
_CLI_SERIES, _CLI_BOOT = 20, 21


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _n_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sectioned key-value config file")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", type=Path, help="output directory (default from config)")
    common.add_argument("--threads", type=int, help="worker processes, 0 = all cores")
    common.add_argument("--n", type=_n_list, help="sample size(s), comma separated")
    common.add_argument("--draws", type=int, help="bootstrap draws")
    common.add_argument("--bandwidth-scale", type=_positive_float, help="multiply c_h and c_b")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="farboot", description="Functional autoregression bootstrap toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one series to CSV")
    est = sub.add_parser("estimate", parents=[common], help="predict at the target and probe set")
    est.add_argument("--series", type=Path, help="series CSV (default: simulate one)")
    boot = sub.add_parser("bootstrap", parents=[common], help="write bootstrap draws with sidecars")
    boot.add_argument("--series", type=Path, help="series CSV (default: simulate one)")
    exp = sub.add_parser("experiment", parents=[common], help="run Monte Carlo experiments")
    exp.add_argument("--kind", choices=["distribution", "mallows", "consistency", "all"], default="all")
    sub.add_parser("check", parents=[common], help="run the inequality property checks")
    sub.add_parser("config", parents=[common], help="print the effective config")
    return p


def effective_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    run, est = {}, {}
    if args.n is not None:
        run["n"] = args.n
    if args.draws is not None:
        run["draws"] = args.draws
    if args.threads is not None:
        run["threads"] = args.threads
    if args.bandwidth_scale is not None:
        est = {"c_h": cfg.estimator.c_h * args.bandwidth_scale, "c_b": cfg.estimator.c_b * args.bandwidth_scale}
    return cfg.with_overrides(run=run, estimator=est) if (run or est) else cfg


def _out_dir(args, cfg) -> Path:
    return args.out if args.out is not None else Path(cfg.output.directory)


def _series(args, cfg, setup) -> FunctionalSeries:
    if getattr(args, "series", None) is not None:
        s = read_series_csv(args.series)
        if s.grid != setup.grid:
            raise ConfigurationError(f"{args.series}: series has {s.grid.m} grid points, config has {setup.grid.m}")
        return s
    n = cfg.run.n[0]
    vals = simulate_far1_batch(setup.op, setup.innov, n, setup.burn_in, stream(args.seed, _CLI_SERIES), 1)[0]
    return FunctionalSeries(setup.grid, vals, seed=args.seed)


def cmd_simulate(args, cfg) -> int:
    setup = build_setup(cfg)
    out = _out_dir(args, cfg)
    s = _series(args, cfg, setup)
    write_series_csv(out / "series.csv", s.values)
    write_json(out / "series.json", {"seed": args.seed, "n": s.n, "burn_in": setup.burn_in, "model": setup.op.name})
    print(out / "series.csv")
    return 0


def cmd_estimate(args, cfg) -> int:
    setup = build_setup(cfg)
    out = _out_dir(args, cfg)
    s = _series(args, cfg, setup)
    q = resolve_q(cfg, setup, args.seed)
    est = FittedEstimator(s, estimator_config(cfg, s.n, q))
    probes = probe_set(cfg, setup, args.seed)
    targets = [setup.target] + [GridFunction(setup.grid, p) for p in probes]
    ids = ["target"] + [f"probe_{i}" for i in range(len(probes))]
    preds = [est.predict(x) for x in targets]
    write_predictions_csv(out / "predictions.csv", ids, preds)
    c = est.config
    write_json(out / "estimate.json", {"n": s.n, "q": q, "h": c.h, "b": c.b, "r_n": c.r_n, "seed": args.seed})
    print(out / "predictions.csv")
    return 0


def cmd_bootstrap(args, cfg) -> int:
    setup = build_setup(cfg)
    out = _out_dir(args, cfg)
    s = _series(args, cfg, setup)
    q = resolve_q(cfg, setup, args.seed)
    est_b = FittedEstimator(s, estimator_config(cfg, s.n, q), use_b=True)
    pool = extract_residuals(s, est_b)
    x0 = None if cfg.run.x0 == "first" else GridFunction.zeros(setup.grid)
    vals, kappa, fb = generate_pseudo_batch(pool, est_b, x0, stream(args.seed, _CLI_BOOT), cfg.run.draws)
    for i in range(cfg.run.draws):
        draw = BootstrapDraw(vals[i], kappa[i], pool, est_b, args.seed, int(fb[i]))
        write_draw(out, i, draw, args.seed)
    write_series_csv(out / "series.csv", s.values)
    print(f"{cfg.run.draws} draws in {out}")
    return 0


def cmd_experiment(args, cfg) -> int:
    out = _out_dir(args, cfg)
    (out / "config.ini").parent.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config_to_text(cfg))
    kinds = ["distribution", "mallows", "consistency"] if args.kind == "all" else [args.kind]
    if "distribution" in kinds:
        rep = run_distribution_experiment(cfg, args.seed)
        write_distribution_samples(out / "distribution_samples.csv", rep)
        write_json(out / "distribution_summary.json", rep.summary())
        for rec in rep.records:
            flag = "" if rec.valid else "  [invalid: fallback-dominated]"
            print(f"distribution n={rec.n}: ks={np.round(rec.ks, 4).tolist()}{flag}")
    if "mallows" in kinds:
        rep = run_mallows_experiment(cfg, args.seed)
        write_mallows_csv(out / "mallows.csv", rep)
        write_json(out / "mallows_summary.json", rep.summary())
        print(f"mallows median d2: {np.round(rep.medians, 5).tolist()}")
    if "consistency" in kinds:
        rep = run_consistency_experiment(cfg, args.seed)
        write_consistency_csv(out / "consistency.csv", rep)
        write_json(out / "consistency_summary.json", rep.summary())
        print(f"consistency mean error: {np.round(rep.mean_errors, 5).tolist()}")
    return 0


def cmd_check(args, cfg) -> int:
    results = run_checks(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_config(args, cfg) -> int:
    sys.stdout.write(config_to_text(cfg))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "bootstrap": cmd_bootstrap,
    "experiment": cmd_experiment,
    "check": cmd_check,
    "config": cmd_config,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigurationError as exc:
        print(f"farboot: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateSampleError, NumericalError) as exc:
        diag = getattr(exc, "diagnostics", None)
        extra = f" {diag}" if diag else ""
        print(f"farboot: numerical degeneracy: {exc}{extra}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
