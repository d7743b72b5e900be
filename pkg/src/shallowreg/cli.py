"""Command line entry point: ``shallowreg run | verify | defaults``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shallowreg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment grid and write CSV/JSON records")
    run.add_argument("--example", required=True, choices=bench.EXAMPLES)
    run.add_argument("--algorithm", required=True, choices=bench.ALGORITHMS)
    run.add_argument("--delta", type=float, nargs="+", default=None,
                     help="noise level(s); default: 1e-4 1e-3 0.1 0.2")
    run.add_argument("--seed", type=int, nargs="+", default=None,
                     help="seed(s); default: the three reference seeds of the example")
    run.add_argument("--tau", type=float, default=1.0001)
    run.add_argument("--n-max", type=int, default=None)
    run.add_argument("--iterations", type=int, default=None,
                     help="Adam steps per width (default depends on example/algorithm)")
    run.add_argument("--penalty", choices=("h1", "path_norm"), default="h1",
                     help="penalty for enn2")
    run.add_argument("--energy-factor", type=float, default=5.0,
                     help="enn1 bound B as a multiple of the exact Barron norm")
    run.add_argument("--full-sweep", action="store_true",
                     help="keep expanding after the discrepancy principle is met")
    run.add_argument("--out", default=None,
                     help=f"output directory (default: ${bench.OUTPUT_ENV} or ./runs)")

    sub.add_parser("verify", help="run the built-in oracle and property checks")
    sub.add_parser("defaults", help="print the reference experiment configuration as JSON")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "defaults":
        print(json.dumps(bench.reference_defaults(), indent=2))
        return EXIT_OK

    if args.command == "verify":
        from .checks import run_checks
        results = run_checks()
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME

    config = bench.ExperimentConfig(
        example=args.example, algorithm=args.algorithm,
        deltas=args.delta if args.delta is not None else list(bench.REFERENCE_DELTAS),
        seeds=args.seed if args.seed is not None else list(bench.REFERENCE_SEEDS[args.example]),
        out=args.out or bench.default_output_dir(), tau=args.tau, n_max=args.n_max,
        iterations=args.iterations, penalty=args.penalty, energy_factor=args.energy_factor,
        full_sweep=args.full_sweep)
    try:
        config.validate()
    except bench.UsageError as exc:
        print(f"shallowreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = bench.run_experiment(config)
    except Exception as exc:  # noqa: BLE001 - report and map to exit code
        print(f"shallowreg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
