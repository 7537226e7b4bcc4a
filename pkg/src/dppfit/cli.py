"""Command line interface.

    dppfit simulate|fit|replicate|compare --config cfg.json
           [--seed N] [--out DIR] [--se] [--ic] [--threads K]

Exit codes: 0 success, 1 estimation failure, 2 input/config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DppfitError, EstimationError, PatternFormatError
from .harness import ExperimentConfig, cmd_compare, cmd_fit, cmd_replicate, cmd_simulate, resolve_threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppfit",
        description="Simulation and composite likelihood fitting of stationary DPPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "draw replicate point patterns and write them as CSV"),
        ("fit", "fit model(s) to a pattern CSV"),
        ("replicate", "simulate + fit R replicates and tabulate mean/sd"),
        ("compare", "model selection frequencies by information criterion"),
    ):
        cmd = sub.add_parser(name, help=help_)
        cmd.add_argument("--config", required=True, help="experiment config JSON")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="output directory (or file for fit)")
        cmd.add_argument("--se", action="store_true", help="add sandwich standard errors")
        cmd.add_argument("--ic", action="store_true", help="add the information criterion")
        cmd.add_argument("--threads", type=int, default=None, help="worker processes (or DPPFIT_THREADS)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.from_json(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.se:
            config.se = True
        if args.ic:
            config.ic = True
        out = args.out if args.out is not None else config.out
        threads = resolve_threads(args.threads)
        if args.command == "simulate":
            if out is None:
                raise ConfigError("simulate requires --out or config 'out'")
            paths = cmd_simulate(config, out)
            print(f"wrote {len(paths)} patterns to {out}")
        elif args.command == "fit":
            payload = cmd_fit(config, out)
            if out is None:
                json.dump(payload, sys.stdout, indent=2, sort_keys=True)
                print()
        elif args.command == "replicate":
            summary = cmd_replicate(config, out, threads)
            mean, sd = summary.mean, summary.sd
            print(f"replicates: {summary.n_success}/{config.replications} succeeded")
            for key in ("lambda_hat", "alpha_hat"):
                sd_txt = "n/a" if sd[key] is None else f"{sd[key]:.8g}"
                print(f"  {key}: mean={mean[key]:.8g} sd={sd_txt}")
            if summary.failures:
                print(f"  failures: {summary.failures}")
        elif args.command == "compare":
            payload = cmd_compare(config, out, threads)
            for model, freq in payload["selection_frequencies"].items():
                print(f"  {model}: {freq:.3f}")
    except (ConfigError, PatternFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, DppfitError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
