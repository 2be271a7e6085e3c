"""Command-line front end.

``fracspde <command> --config cfg.json [--out DIR] [--seed S] [--workers K] [--refine]``

Exit status is 0 when the run passes its acceptance check, 2 when the check
fails and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .experiments import KINDS, RUNNERS, ConfigError, ExperimentConfig

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracspde", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=KINDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory for CSV tables and manifest.json")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--workers", type=int, help="worker processes (default: logical cores)")
    p.add_argument("--refine", action="store_true",
                   help="also rerun with the estimation grid doubled to show bias shrinkage")
    return p


def _load(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    data["kind"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    if args.workers is not None:
        data["workers"] = args.workers
    return ExperimentConfig.from_dict(data)


def _refined(cfg: ExperimentConfig) -> ExperimentConfig:
    out = None if cfg.out is None else f"{cfg.out.rstrip('/')}/refined"
    eps = None if cfg.eps is None else cfg.eps / 2
    return cfg.replace(n=cfg.n * 2, eps=eps, out=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        runs = [cfg, _refined(cfg)] if args.refine else [cfg]
        passed = True
        for c in runs:
            if len(runs) > 1:
                print(f"== n = {c.n}" + ("" if c.eps is None else f", eps = {c.eps:g}"))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                result = RUNNERS[c.kind](c)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            for line in result.summary_lines():
                print(line)
            print("PASS" if result.passed else "FAIL")
            passed = passed and result.passed
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
