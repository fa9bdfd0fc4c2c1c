"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .driver import ConfigError, parse_config, parse_theta_schedule, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlasov-dlr",
        description="Conservative dynamical low-rank Vlasov-Poisson simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a simulation and write diagnostics")
    p_run.add_argument("--preset", help="scenario preset name")
    p_run.add_argument("--config", help="flat key=value configuration file")
    p_run.add_argument("--r", type=int, help="initial (or fixed) rank")
    p_run.add_argument("--m", type=int, help="number of fixed conserved directions (0..3)")
    p_run.add_argument(
        "--policy",
        choices=["fixed", "solution", "efield", "energy"],
        help="rank policy",
    )
    theta = p_run.add_mutually_exclusive_group()
    theta.add_argument("--theta", type=float, help="constant truncation tolerance")
    theta.add_argument(
        "--theta-schedule",
        help="piecewise tolerance, e.g. 0:1e-9,20:1e-7",
    )
    p_run.add_argument("--t-end", type=float, help="final time")
    p_run.add_argument("--dt", type=float, help="time step size")
    p_run.add_argument("--out", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "run":  # pragma: no cover - argparse enforces this
        return 2
    overrides = {
        "r": args.r,
        "m": args.m,
        "policy": args.policy,
        "theta": args.theta,
        "t_end": args.t_end,
        "dt": args.dt,
        "out_dir": args.out,
    }
    if args.theta_schedule is not None:
        overrides["theta_schedule"] = parse_theta_schedule(args.theta_schedule)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.preset is None and args.config is None:
        print("error: provide --preset and/or --config", file=sys.stderr)
        return 2
    try:
        config = parse_config(
            preset=args.preset, config_file=args.config, overrides=overrides
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run(config)
    print(f"{result.message}: wrote {result.csv_path} ({len(result.records)} rows)")
    if result.records:
        last = result.records[-1]
        print(
            f"t={last.t:g} rank={last.rank} mass_rel_err={last.mass_rel_err:.3e} "
            f"momentum_abs_err={last.momentum_abs_err:.3e} "
            f"energy_rel_err={last.energy_rel_err:.3e}"
        )
    return result.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
