"""
Experiment configuration and the (problem x algorithm x population x repeat) runner.
"""

import dataclasses
import hashlib
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, NamedTuple, Optional, Tuple

from joblib import Parallel, delayed

from ..errors import DataError, EaqgaError, UsageError
from ..core.baselines import AqgaConfig, GaConfig, run_aqga, run_ga
from ..core.entangled_ga import EaqgaConfig, run_eaqga
from ..core.oracle import brute_force
from ..core.problem import QuboProblem, SynthSpec, load_problem, synth_problem
from ..core.records import ALGORITHMS, RunRecord
from .report import SummaryRow, summarize

logger = logging.getLogger(__name__)

RUNNERS: Dict[str, Tuple[type, Callable[..., RunRecord]]] = {
    "EAQGA": (EaqgaConfig, run_eaqga),
    "GA": (GaConfig, run_ga),
    "AQGA": (AqgaConfig, run_aqga),
}

# set per cell from [run], never from [algorithms.<name>]
RUN_KEYS = frozenset({"population", "max_iterations", "seed"})


def derive_seed(master_seed: int, problem_id: str, algorithm: str, repeat: int) -> int:
    """Stable 64-bit seed for one run.

    Adding repeats, problems or algorithms leaves the existing seeds unchanged.
    """
    text = f"{master_seed}|{problem_id}|{algorithm}|{repeat}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


def algorithm_config(algorithm: str, overrides: Mapping[str, Any], population: int, iterations: int, seed: int):
    """Hyperparameter dataclass for one run of ``algorithm``."""
    name = algorithm.upper()
    if name not in RUNNERS:
        raise UsageError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
    clash = RUN_KEYS.intersection(overrides)
    if clash:
        raise UsageError(f"[algorithms.{name}] may not set {sorted(clash)}; use [run]")
    config_cls, _ = RUNNERS[name]
    return config_cls.from_dict({**overrides, "population": population, "max_iterations": iterations, "seed": seed})


def run_algorithm(algorithm: str, problem: QuboProblem, cfg, timing: bool = False) -> RunRecord:
    _, runner = RUNNERS[algorithm.upper()]
    return runner(problem, cfg, timing=timing)


@dataclass(frozen=True)
class SynthSource:
    n: int
    seed: int
    spec: SynthSpec = field(default_factory=SynthSpec)


@dataclass(frozen=True)
class ExperimentConfig:
    """A full benchmark matrix.

    Attributes:
        problem_files: Problem JSON paths (relative paths resolve against ``base_dir``).
        synth: Synthetic problems to generate.
        algorithms: Algorithm name -> hyperparameter overrides, in run order.
        repeats: Runs per (problem, algorithm, population) cell.
        master_seed: Root of every derived run seed.
        parallelism: Worker count; None defers to ``EAQGA_THREADS``.
        populations: Population sizes to sweep.
        iterations: Generations per run.
        oracle: Compute exact optima for problems within ``oracle_limit``.
        output_dir: Default output directory for ``bench``.
        scale: Multiplier applied in the summary table.
        record_wall_time: Store wall-clock time in the raw records.
    """

    problem_files: Tuple[str, ...] = ()
    synth: Tuple[SynthSource, ...] = ()
    algorithms: Mapping[str, Mapping[str, Any]] = field(
        default_factory=lambda: {name: {} for name in ALGORITHMS}
    )
    repeats: int = 100
    master_seed: int = 0
    parallelism: Optional[int] = None
    populations: Tuple[int, ...] = (10,)
    iterations: int = 20
    oracle: bool = True
    oracle_limit: int = 20
    output_dir: Optional[str] = None
    scale: float = 1.0
    record_wall_time: bool = False
    base_dir: str = "."

    def __post_init__(self):
        if self.repeats < 1:
            raise UsageError(f"repeats must be >= 1, got {self.repeats}")
        if not self.problem_files and not self.synth:
            raise UsageError("experiment lists no problems")
        if not self.algorithms:
            raise UsageError("experiment lists no algorithms")
        if not self.populations:
            raise UsageError("experiment lists no populations")
        if self.parallelism is not None and self.parallelism < 1:
            raise UsageError(f"parallelism must be >= 1, got {self.parallelism}")
        algorithms = {}
        for name, overrides in self.algorithms.items():
            overrides = dict(overrides or {})
            # validates names and values up front
            for population in self.populations:
                algorithm_config(name, overrides, population, self.iterations, 0)
            algorithms[name.upper()] = overrides
        object.__setattr__(self, "algorithms", algorithms)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problems": {
                "files": list(self.problem_files),
                "synth": [{"n": s.n, "seed": s.seed, **dataclasses.asdict(s.spec)} for s in self.synth],
            },
            "algorithms": {name: dict(o) for name, o in self.algorithms.items()},
            "run": {
                "repeats": self.repeats,
                "seed": self.master_seed,
                "parallelism": self.parallelism,
                "populations": list(self.populations),
                "iterations": self.iterations,
                "oracle": self.oracle,
                "oracle_limit": self.oracle_limit,
            },
            "output": {"scale": self.scale, "record_wall_time": self.record_wall_time},
        }


def _synth_sources(entries: Any) -> Tuple[SynthSource, ...]:
    if isinstance(entries, dict):
        entries = [entries]
    sources = []
    for entry in entries or []:
        entry = dict(entry)
        n = entry.pop("n")
        seeds = entry.pop("seeds", None)
        if seeds is None:
            seeds = [entry.pop("seed", 0)]
        spec = SynthSpec.from_dict(entry)
        sources.extend(SynthSource(n=int(n), seed=int(s), spec=spec) for s in seeds)
    return tuple(sources)


def experiment_from_dict(data: Mapping[str, Any], base_dir: str = ".") -> ExperimentConfig:
    """Build an ExperimentConfig from the parsed TOML layout.

    Raises:
        UsageError: On unknown algorithms or invalid values.
    """
    problems = data.get("problems", {})
    run = data.get("run", {})
    output = data.get("output", {})
    try:
        populations = run.get("populations", run.get("population", 10))
        if isinstance(populations, int):
            populations = [populations]
        return ExperimentConfig(
            problem_files=tuple(problems.get("files", ())),
            synth=_synth_sources(problems.get("synth")),
            algorithms=data.get("algorithms") or {name: {} for name in ALGORITHMS},
            repeats=int(run.get("repeats", 100)),
            master_seed=int(run.get("seed", 0)),
            parallelism=run.get("parallelism"),
            populations=tuple(int(p) for p in populations),
            iterations=int(run.get("iterations", 20)),
            oracle=bool(run.get("oracle", True)),
            oracle_limit=int(run.get("oracle_limit", 20)),
            output_dir=output.get("dir"),
            scale=float(output.get("scale", 1.0)),
            record_wall_time=bool(output.get("record_wall_time", False)),
            base_dir=base_dir,
        )
    except UsageError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise UsageError(f"invalid experiment config: {e}")


def load_experiment(path: str) -> ExperimentConfig:
    """Read an experiment TOML file.

    Raises:
        DataError: When the file cannot be read or is not valid TOML.
    """
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as e:
        raise DataError(f"cannot read experiment config {path}: {e}")
    return experiment_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve_problems(cfg: ExperimentConfig) -> List[QuboProblem]:
    """Load and generate every problem, in config order.

    Raises:
        DataError: When a problem file is unreadable.
        UsageError: When two problems share an id.
    """
    problems = []
    for path in cfg.problem_files:
        full = path if os.path.isabs(path) else os.path.join(cfg.base_dir, path)
        problems.append(load_problem(full))
    problems.extend(synth_problem(s.n, s.seed, s.spec) for s in cfg.synth)
    ids = [p.problem_id for p in problems]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise UsageError(f"duplicate problem ids: {duplicates}")
    return problems


class Job(NamedTuple):
    problem_index: int
    algorithm: str
    population: int
    repeat: int
    seed: int


class JobOutcome(NamedTuple):
    job: Job
    record: Optional[RunRecord]
    error: Optional[str]


def _execute(job: Job, problem: QuboProblem, overrides: Mapping[str, Any], iterations: int, timing: bool) -> JobOutcome:
    try:
        cfg = algorithm_config(job.algorithm, overrides, job.population, iterations, job.seed)
        return JobOutcome(job, run_algorithm(job.algorithm, problem, cfg, timing=timing), None)
    except (EaqgaError, ArithmeticError, ValueError) as e:
        return JobOutcome(job, None, f"{type(e).__name__}: {e}")


class ExperimentResult(NamedTuple):
    problems: List[QuboProblem]
    records: List[RunRecord]
    rows: List[SummaryRow]
    optima: Dict[str, Optional[float]]
    repeats: List[int]

    @property
    def failures(self) -> List[SummaryRow]:
        return [row for row in self.rows if row.error]


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ExperimentResult:
    """Run every cell of the experiment matrix.

    Jobs are dispatched to ``workers`` processes (``cfg.parallelism`` first,
    then the argument, then 1) and collected in job order, so the result does
    not depend on scheduling. A failing run marks its whole cell with the
    error; the other cells still complete.
    """
    problems = resolve_problems(cfg)
    degree = cfg.parallelism or workers or 1
    logger.info(
        "experiment: %d problem(s), algorithms %s, populations %s, %d repeat(s), %d worker(s)",
        len(problems),
        ",".join(cfg.algorithms),
        list(cfg.populations),
        cfg.repeats,
        degree,
    )

    # Exact optima for problems small enough to enumerate
    optima: Dict[str, Optional[float]] = {}
    for problem in problems:
        if cfg.oracle and problem.n <= cfg.oracle_limit:
            optima[problem.problem_id] = brute_force(problem, n_limit=cfg.oracle_limit).best_fitness
        else:
            optima[problem.problem_id] = None

    # One job per (problem, algorithm, population, repeat)
    jobs = [
        Job(k, algorithm, population, r, derive_seed(cfg.master_seed, problem.problem_id, algorithm, r))
        for k, problem in enumerate(problems)
        for algorithm in cfg.algorithms
        for population in cfg.populations
        for r in range(cfg.repeats)
    ]
    tasks = (
        delayed(_execute)(job, problems[job.problem_index], cfg.algorithms[job.algorithm], cfg.iterations, cfg.record_wall_time)
        for job in jobs
    )
    # Parallel keeps results in job order
    outcomes: List[JobOutcome] = Parallel(n_jobs=degree)(tasks)

    # Split successes from failures; the first error marks its cell
    records: List[RunRecord] = []
    repeats: List[int] = []
    errors: Dict[Tuple[str, str, int], str] = {}
    for outcome in outcomes:
        job = outcome.job
        cell = (problems[job.problem_index].problem_id, job.algorithm, job.population)
        if outcome.error is not None:
            logger.error("run %s repeat %d failed: %s", cell, job.repeat, outcome.error)
            errors.setdefault(cell, f"repeat {job.repeat}: {outcome.error}")
        else:
            records.append(outcome.record)
            repeats.append(job.repeat)

    cells = [
        (problem.problem_id, algorithm, population)
        for problem in problems
        for algorithm in cfg.algorithms
        for population in cfg.populations
    ]
    rows = summarize(records, cells, optima, errors)
    for row in rows:
        if not row.error:
            logger.info("cell %s %s pop=%d: avg=%.6g std=%.6g", row.problem_id, row.algorithm, row.population, row.avg, row.std)
    return ExperimentResult(problems, records, rows, optima, repeats)
