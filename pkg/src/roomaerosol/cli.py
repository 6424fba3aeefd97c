"""Command-line client: ``roomaerosol <command> --config scenario.yaml --out dir``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import SolverError, ValidationError
from .scenario import SURROGATE_CHOICES, run_scenario, write_tables

log = logging.getLogger("roomaerosol")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario YAML file")
    common.add_argument("--out", help="output directory (default: output.dir from the config)")
    common.add_argument("--modes", type=int, help="fixed positive-mode count per axis (default: adaptive)")
    common.add_argument("--tol", type=float, help="relative root tolerance on lambda*L")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent evaluations")
    common.add_argument("--negative-mode", choices=("decaying", "exact"),
                        help="time factor of the negative-eigenvalue mode")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="roomaerosol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="dump eigenvalues, norms and weights")
    sub.add_parser("point", parents=[common], help="instantaneous point-source field")
    breath = sub.add_parser("breath", parents=[common], help="exhalation field")
    breath.add_argument("--surrogate", action="append", choices=SURROGATE_CHOICES,
                        help="emitter model; repeat for several (default: circular)")
    sub.add_parser("sample", parents=[common], help="sampled concentration C_samp")
    sub.add_parser("pmd", parents=[common], help="miss-detection probability (gamma or location sweep)")
    trunc = sub.add_parser("truncation", parents=[common], help="error versus mode count")
    trunc.add_argument("--avg-over", choices=("time", "space"), help="averaging protocol")
    sub.add_parser("validate", parents=[common], help="oracle comparisons and residual tables")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    options = {}
    if args.command == "breath":
        options["surrogates"] = tuple(args.surrogate or ("circular",))
    if args.command == "truncation" and args.avg_over:
        options["avg_over"] = args.avg_over
    try:
        config = load_config(args.config)
        config = config.with_solver(modes=args.modes, tol=args.tol, negative_mode=args.negative_mode)
        ctx, tables = run_scenario(config, args.command, threads=args.threads, **options)
        paths = write_tables(tables, args.out or config.output.dir, ctx.header(args.command))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for path in paths:
        log.info("wrote %s", path)
    if args.command == "validate":
        failed = [r for r in tables[0].rows if not r[5]]
        for row in tables[0].rows:
            print(f"{'PASS' if row[5] else 'FAIL'} {row[0]} axis={row[1]} t={row[2]} value={row[3]} tol={row[4]}")
        if failed:
            return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
