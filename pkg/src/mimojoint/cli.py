"""Command-line front-end.

Subcommands:
    validate --suite <name>                 run one invariant suite
    sweep    --config <path> --out <csv>    run the configured sweep
    solve    --config <path> --metric mi|wmse --csi stat|est
             --method opt|uniform|eigapprox [--bits]

Exit codes: 0 success, 1 validation failure, 2 usage or config error.
The MIMOJOINT_THREADS environment variable caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .channel import CorrelatedChannelModel
from .config import ConfigError
from .estcsi import solve_eig_approx, solve_uniform_training
from .harness import (
    SUITES,
    UsageError,
    _check_combination,
    load_config,
    rows_to_csv,
    run_sweep,
    run_validation,
)
from .statcsi import solve_joint_statistical, solve_uniform_statistical


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimojoint",
        description="Joint MIMO training-sequence and precoder optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="run an invariant suite")
    p_val.add_argument("--suite", required=True, choices=SUITES)

    p_sweep = sub.add_parser("sweep", help="run the sweep described by a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True, help="output CSV path")

    p_solve = sub.add_parser("solve", help="solve one scenario")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--metric", required=True, choices=("mi", "wmse"))
    p_solve.add_argument("--csi", required=True, choices=("stat", "est"))
    p_solve.add_argument("--method", required=True, choices=("opt", "uniform", "eigapprox"))
    p_solve.add_argument(
        "--bits", action="store_true", help="report mutual information in bits"
    )
    return parser


def _cmd_validate(args) -> int:
    report = run_validation(args.suite)
    print(report.to_json())
    return 0 if report.passed else 1


def _cmd_sweep(args) -> int:
    cfg, spec, _ = load_config(args.config)
    if spec is None:
        raise UsageError("config has no [sweep] table")
    rows = run_sweep(spec, cfg)
    with open(args.out, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    cfg, _, mc = load_config(args.config)
    _check_combination(args.csi, args.method)
    model = CorrelatedChannelModel.from_exponential(cfg.corr_theta, cfg.n_tx, cfg.n_rx)
    if args.csi == "stat":
        solver = solve_joint_statistical if args.method == "opt" else solve_uniform_statistical
        sol = solver(cfg, model, args.metric)
    elif args.method == "uniform":
        sol = solve_uniform_training(cfg, model, args.metric, mc)
    else:
        sol = solve_eig_approx(cfg, model, args.metric, mc_validation=mc)
    objective = sol.objective
    unit = "nat"
    if args.bits and args.metric == "mi":
        objective /= math.log(2.0)
        unit = "bit"
    result = {
        "metric": args.metric,
        "csi": args.csi,
        "method": args.method,
        "objective": objective,
        "objective_unit": unit if args.metric == "mi" else "mse",
        "t_train": sol.t_train,
        "p_data": sol.p_data,
        "x_powers": np.asarray(sol.x_powers).tolist(),
        "f_powers": np.asarray(sol.f_powers).tolist(),
        "iterations": sol.iterations,
        "status": sol.status.value,
    }
    if sol.mc_objective is not None:
        result["mc_objective"] = (
            sol.mc_objective / math.log(2.0)
            if args.bits and args.metric == "mi"
            else sol.mc_objective
        )
    print(json.dumps(result, indent=2))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_solve(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
