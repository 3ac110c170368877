"""Batch command-line interface.

Verbs: simulate, featurize, irl, recognize, report, run (all stages) and
dp-oracle.  Exit codes: 0 success, 2 configuration error, 3 partial cell
failure.
"""

from __future__ import annotations

import argparse
import sys

from ..exceptions import ValidationError
from .config import load_config
from .oracle import secretary_dp_oracle, simulate_cutoff_success
from .runner import (
    emit_plot_data,
    featurize_stage,
    irl_stage,
    recognize_stage,
    run_experiment,
    simulate_stage,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--profile", choices=["desk", "paper"], default=None,
                        help="override the scale profile")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes for IRL")


def _load(args) -> "ExperimentConfig":
    overrides = {
        "seed": args.seed,
        "profile": args.profile,
        "output_dir": args.out,
        "jobs": args.jobs,
    }
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardspace",
        description="Recognize decision-making agents in reward space.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, blurb in (
        ("run", "run all pipeline stages"),
        ("simulate", "generate agent cohorts"),
        ("featurize", "compute action-space features"),
        ("irl", "infer per-agent rewards"),
        ("recognize", "cluster/classify and write metrics.csv"),
        ("report", "emit per-figure plot data from metrics"),
    ):
        stage = sub.add_parser(verb, help=blurb)
        _add_config_arguments(stage)

    oracle = sub.add_parser("dp-oracle", help="optimal secretary cutoff by dynamic programming")
    oracle.add_argument("--applicants", type=int, required=True)
    oracle.add_argument("--simulate", type=int, default=0,
                        help="also Monte Carlo the optimal rule over N orderings")
    oracle.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verb == "dp-oracle":
        try:
            h_star, probability = secretary_dp_oracle(args.applicants)
        except ValidationError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"optimal cutoff h* = {h_star}")
        print(f"success probability = {probability:.6f}")
        if args.simulate > 0:
            estimate = simulate_cutoff_success(args.applicants, h_star, args.simulate, args.seed)
            print(f"monte carlo estimate ({args.simulate} orderings) = {estimate:.6f}")
        return EXIT_OK

    try:
        cfg = _load(args)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "run":
            report = run_experiment(cfg)
        elif args.verb == "simulate":
            simulate_stage(cfg)
            return EXIT_OK
        elif args.verb == "featurize":
            featurize_stage(cfg)
            return EXIT_OK
        elif args.verb == "irl":
            failures = irl_stage(cfg)
            if failures:
                for key, message in sorted(failures.items()):
                    print(f"cell failure: {key}: {message}", file=sys.stderr)
                return EXIT_PARTIAL
            return EXIT_OK
        elif args.verb == "recognize":
            report = recognize_stage(cfg)
        elif args.verb == "report":
            report = recognize_stage(cfg)
            emit_plot_data(cfg, report)
        else:  # pragma: no cover - argparse restricts verbs
            raise ValidationError(f"unknown verb {args.verb!r}")
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if not report.succeeded:
        for key, message in sorted(report.failures.items()):
            print(f"cell failure: {key}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    for row in report.rows:
        print(
            f"{row['method']:>8s}  sweep={row['sweep']:<4d} {row['metric']:<22s} "
            f"mean={row['mean']:.4f} std={row['std']:.4f} (n={row['replications']})"
        )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
