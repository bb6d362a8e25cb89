"""``mdsdelivery`` command line.

    mdsdelivery run --config PATH [--trials N] [--seed X] [--out PATH] [--threads T]
    mdsdelivery validate --config PATH
    mdsdelivery oracle NAME [--seed X]

Exit codes: 0 success, 1 configuration error, 2 runtime error.  The
default worker count comes from the MDSDELIVERY_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import ConfigError, parse_config, serialize
from .experiment import RESULT_FIELDS, THREADS_ENV, default_threads, run_experiment
from .oracles import ORACLES, demo

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdsdelivery", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep and write CSV results")
    run.add_argument("--config", required=True, help="experiment INI file")
    run.add_argument("--trials", type=int, help="override [experiment] trials")
    run.add_argument("--seed", type=int, help="override [experiment] seed")
    run.add_argument("--out", help="override [experiment] output")
    run.add_argument("--threads", type=int, default=None,
                     help=f"worker processes (default: ${THREADS_ENV} or 1)")

    val = sub.add_parser("validate", help="parse a config and print it with defaults filled in")
    val.add_argument("--config", required=True)

    orc = sub.add_parser("oracle", help="print reference values of a brute-force oracle")
    orc.add_argument("name", choices=ORACLES)
    orc.add_argument("--seed", type=int, default=0)
    return ap


def _apply_overrides(cfg, args):
    ex = cfg.experiment
    if args.trials is not None:
        ex = replace(ex, trials=args.trials)
    if args.seed is not None:
        ex = replace(ex, seed=args.seed)
    if args.out is not None:
        ex = replace(ex, output=args.out)
    return replace(cfg, experiment=ex)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = parse_config(args.config)
            sys.stdout.write(serialize(cfg))
            return EXIT_OK
        if args.command == "oracle":
            print(json.dumps(demo(args.name, args.seed), indent=1))
            return EXIT_OK
        cfg = _apply_overrides(parse_config(args.config), args)
        threads = default_threads() if args.threads is None else args.threads
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        res = run_experiment(cfg, threads=threads)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(",".join(RESULT_FIELDS))
    for r in res.rows:
        print(",".join(str(getattr(r, f)) for f in RESULT_FIELDS))
    if res.failures:
        print(f"{len(res.failures)} failed trial runs recorded in the .trials CSV", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
