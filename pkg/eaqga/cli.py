"""
Command line interface: ingest, synth, solve, oracle, bench and version.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .bench.experiment import algorithm_config, load_experiment, run_algorithm, run_experiment
from .bench.recorder import ResultRecorder
from .config import Settings
from .core.entangled_ga import run_eaqga
from .core.oracle import brute_force
from .core.problem import (
    DEFAULT_RISK_AVERSION,
    SynthSpec,
    build_portfolio,
    dump_problem,
    load_prices,
    load_problem,
    select_subsets,
    synth_problem,
)
from .core.records import ALGORITHMS
from .core.sampler import circuit_stats, plan_to_dict
from .errors import DataError, EaqgaError, UsageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}")
    logger.info("wrote %s", path)


def cmd_ingest(args, settings: Settings) -> int:
    prices = load_prices(args.prices)
    base_id = args.id or os.path.splitext(os.path.basename(args.prices))[0]
    if args.subsets is None:
        _emit(dump_problem(build_portfolio(prices, q=args.q, problem_id=base_id)), args.output)
        return EXIT_OK

    if args.output is None:
        raise UsageError("--subsets needs -o DIR")
    if args.subsets < 1:
        raise UsageError(f"--subsets must be >= 1, got {args.subsets}")
    # Default size splits the tickers evenly
    size = args.subset_size if args.subset_size is not None else len(prices.tickers) // args.subsets
    os.makedirs(args.output, exist_ok=True)
    for k, subset in enumerate(select_subsets(prices, size, args.subsets, args.seed), start=1):
        problem = build_portfolio(subset, q=args.q, problem_id=f"{base_id}-sub{k}")
        _emit(dump_problem(problem), os.path.join(args.output, f"{problem.problem_id}.json"))
    return EXIT_OK


def cmd_synth(args, settings: Settings) -> int:
    spec = SynthSpec(q=args.q) if args.q is not None else None
    problem = synth_problem(args.n, args.seed, spec)
    _emit(dump_problem(problem), args.output)
    return EXIT_OK


def cmd_solve(args, settings: Settings) -> int:
    problem = load_problem(args.problem)
    algorithm = args.algo.upper()
    cfg = algorithm_config(algorithm, {}, args.pop, args.iters, args.seed)

    if args.dump_plan is None:
        record = run_algorithm(algorithm, problem, cfg, timing=args.timing)
    else:
        if algorithm != "EAQGA":
            raise UsageError("--dump-plan is only available for eaqga")
        if args.iters < 2:
            raise UsageError("--dump-plan needs --iters >= 2")
        # Keep the first circuit of generation 2
        captured = []

        def keep_first_plan(t, pool, plans):
            if t == 2:
                captured.append(plans[0])

        record = run_eaqga(problem, cfg, on_generation=keep_first_plan, timing=args.timing)
        dump = {"plan": plan_to_dict(captured[0]), "stats": circuit_stats(captured[0])}
        _emit(json.dumps(dump, sort_keys=True, indent=2) + "\n", args.dump_plan)

    _emit(record.to_json(timing=args.timing), args.output)
    return EXIT_OK


def cmd_oracle(args, settings: Settings) -> int:
    problem = load_problem(args.problem)
    limit = args.limit if args.limit is not None else settings.oracle_limit
    result = brute_force(problem, n_limit=limit, blocks=args.blocks, workers=args.workers or settings.threads)
    _emit(json.dumps(result.to_dict(), sort_keys=True) + "\n", args.output)
    return EXIT_OK


def cmd_bench(args, settings: Settings) -> int:
    cfg = load_experiment(args.config)
    out_dir = args.output or cfg.output_dir or "results"
    result = run_experiment(cfg, workers=settings.threads)
    # Write everything that completed before reporting failures
    recorder = ResultRecorder(out_dir, timing=cfg.record_wall_time)
    recorder.write_experiment(result, cfg.to_dict(), scale=cfg.scale)
    if result.failures:
        raise DataError(f"{len(result.failures)} cell(s) failed; see {os.path.join(out_dir, 'metadata.json')}")
    return EXIT_OK


def cmd_version(args, settings: Settings) -> int:
    sys.stdout.write(f"eaqga {__version__}\n")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="eaqga", description="EAQGA solver and benchmark harness for QUBO portfolio problems")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("ingest", help="build a problem file from a price CSV")
    p.add_argument("prices", help="CSV with a date column followed by one column per ticker")
    p.add_argument("--q", type=float, default=DEFAULT_RISK_AVERSION, help="risk aversion (default 0.5)")
    p.add_argument("--id", help="problem id (default: file stem)")
    p.add_argument("--subsets", type=int, help="emit this many disjoint ticker subsets")
    p.add_argument("--subset-size", type=int, help="tickers per subset")
    p.add_argument("--seed", type=int, default=0, help="subset selection seed")
    p.add_argument("-o", "--output", help="output file (directory with --subsets); stdout if omitted")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic problem")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--q", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="run one algorithm on a problem")
    p.add_argument("--algo", required=True, type=str.lower, choices=[a.lower() for a in ALGORITHMS])
    p.add_argument("--problem", required=True)
    p.add_argument("--pop", type=int, default=10)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="record wall-clock time")
    p.add_argument("--dump-plan", metavar="FILE", help="write the first generation-2 circuit plan (eaqga)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="exhaustive optimum of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--limit", type=int, help="largest n accepted (default EAQGA_ORACLE_LIMIT or 26)")
    p.add_argument("--blocks", type=int, default=1, help="prefix blocks, a power of two")
    p.add_argument("--workers", type=int, help="parallel workers (default EAQGA_THREADS)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--output", help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


def cli(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """Run one command and return its exit status."""
    settings = settings or Settings()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args, settings)
    except UsageError as e:
        logger.debug("usage error in %s", args.command)
        sys.stderr.write(f"eaqga: error: {e}\n")
        return EXIT_USAGE
    except EaqgaError as e:
        logger.debug("data error in %s", args.command)
        sys.stderr.write(f"eaqga: error: {e}\n")
        return EXIT_DATA
    except OSError as e:
        sys.stderr.write(f"eaqga: error: {e}\n")
        return EXIT_DATA
