"""Command line entry point.

    fclt <spectrum|berry|mixing|ustat|radius|kargin> --config <path>
         [--seed <u64>] [--threads <n>] [--out <dir>]

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 noise-floor
refusal.  FCLT_THREADS is the fallback for --threads.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, DomainError, NoiseFloorError, NumericError
from .runner import EXPERIMENTS, parse_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NOISE_FLOOR = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fclt", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: FCLT_THREADS or 1)")
    parser.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("FCLT_THREADS", "1"))
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                [f"experiment: config says {cfg.experiment!r} but the subcommand is {args.experiment!r}"]
            )
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.ensemble = replace(cfg.ensemble, seed=args.seed)
        if args.out is not None:
            cfg.out = args.out
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg, threads=threads)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoiseFloorError as exc:
        print(f"noise floor: {exc}", file=sys.stderr)
        return EXIT_NOISE_FLOOR
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"ok: wrote {len(manifest.outputs)} outputs to {cfg.out} (config {manifest.config_hash[:12]})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
