"""
Entanglement-aware quantum-enhanced genetic algorithm (EAQGA).

Each generation measures N circuits once. The two best bitstrings seen so far
(the elitism pool) are scanned for bit pairs that agree or disagree in both
parents; a coupling-weighted random subset of those pairs is turned into
parity chains, and every remaining qubit is biased toward the best parent.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ..errors import PlanError, UsageError
from .params import AlgorithmConfig, check_unit
from .problem import (
    NormalizedCoupling,
    QuboProblem,
    as_bitstring,
    bits_key,
    bits_to_str,
    evaluate_fitness,
    normalize_coupling,
)
from .records import RunRecord
from .sampler import Chain, Parity, SamplingPlan, sample, uniform_plan

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class EaqgaConfig(AlgorithmConfig):
    """EAQGA hyperparameters; defaults are the published settings."""

    population: int = 10
    max_iterations: int = 20
    p_a: float = 0.95
    p_s: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise UsageError(f"population must be >= 2, got {self.population}")
        if self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")
        check_unit("p_a", self.p_a)
        check_unit("p_s", self.p_s)


class Elite(NamedTuple):
    x: np.ndarray
    fitness: float


def _rank_key(elite: Elite):
    return (-elite.fitness, bits_key(elite.x))


@dataclass(frozen=True, eq=False)
class ElitismPool:
    """The two best distinct bitstrings found so far (best2 == best1 if only one exists)."""

    best1: Elite
    best2: Elite


@dataclass(frozen=True)
class CandidatePairs:
    """Bit pairs (i < j) that agree (positive) or disagree (negative) in both parents."""

    positive: FrozenSet[Pair]
    negative: FrozenSet[Pair]

    def ordered(self) -> List[Tuple[Pair, Parity]]:
        """All candidates in ascending (i, j) order, tagged with their kind."""
        tagged = [(p, Parity.POSITIVE) for p in self.positive] + [(p, Parity.NEGATIVE) for p in self.negative]
        return sorted(tagged, key=lambda item: item[0])


class ChainSkeleton(NamedTuple):
    """Chain structure before probabilities are attached."""

    control: int
    targets: Tuple[Tuple[int, Parity], ...]


def update_pool(pool: Optional[ElitismPool], population: Sequence[Tuple[np.ndarray, float]]) -> ElitismPool:
    """Merge a generation into the pool, keeping the two best distinct bitstrings.

    Ties in fitness go to the lexicographically smaller bitstring.
    """
    if not population:
        raise UsageError("population must be non-empty")
    # Deduplicate by bitstring, keeping the best fitness seen for each
    entries = {}
    candidates = list(population)
    if pool is not None:
        candidates = [pool.best1, pool.best2] + candidates
    for x, f in candidates:
        key = bits_key(x)
        if key not in entries or f > entries[key].fitness:
            entries[key] = Elite(as_bitstring(x), float(f))
    ranked = sorted(entries.values(), key=_rank_key)
    return ElitismPool(best1=ranked[0], best2=ranked[1] if len(ranked) > 1 else ranked[0])


def detect_candidate_pairs(x_b1, x_b2) -> CandidatePairs:
    """Scan all pairs for Bell-like patterns shared by both parents."""
    a = as_bitstring(x_b1)
    b = as_bitstring(x_b2)
    if a.size != b.size:
        raise UsageError(f"parents have different lengths {a.size} and {b.size}")
    # Pairwise agreement matrices of both parents
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    # Upper triangle only, i < j
    upper = np.triu(np.ones((a.size, a.size), dtype=bool), k=1)
    pos = np.argwhere(same_a & same_b & upper)
    neg = np.argwhere(~same_a & ~same_b & upper)
    return CandidatePairs(
        positive=frozenset((int(i), int(j)) for i, j in pos),
        negative=frozenset((int(i), int(j)) for i, j in neg),
    )


def decay_factor(t: int, max_iterations: int) -> float:
    """Penalty relaxation schedule ``0.5 + t / (2 * T_max)``; 1.0 at the last generation."""
    return 0.5 + t / (2 * max_iterations)


def _penalized(kind: Parity, coupling: float) -> bool:
    if kind is Parity.POSITIVE:
        return coupling > 0
    return coupling >= 0


def pair_probability(
    pair: Pair,
    kind: Parity,
    sigma_n: NormalizedCoupling,
    p_s: float,
    t: int,
    max_iterations: int,
) -> float:
    """Selection probability of one candidate pair at generation t."""
    if not 1 <= t <= max_iterations:
        raise UsageError(f"iteration {t} outside [1, {max_iterations}]")
    coupling = float(sigma_n.sigma_n[pair])
    if _penalized(Parity(kind), coupling):
        return p_s * decay_factor(t, max_iterations) * abs(coupling)
    return p_s * abs(coupling)


def select_pairs(
    candidates: CandidatePairs,
    sigma_n: NormalizedCoupling,
    p_s: float,
    t: int,
    max_iterations: int,
    rng: np.random.Generator,
) -> Tuple[Pair, ...]:
    """Keep each candidate independently with its pair probability.

    One uniform draw per candidate, in ascending (i, j) order.
    """
    if not 1 <= t <= max_iterations:
        raise UsageError(f"iteration {t} outside [1, {max_iterations}]")
    ordered = candidates.ordered()
    if not ordered:
        return ()
    # Vectorized pair probability over the ordered candidates
    rows = np.array([p[0] for p, _ in ordered], dtype=np.intp)
    cols = np.array([p[1] for p, _ in ordered], dtype=np.intp)
    positive = np.array([kind is Parity.POSITIVE for _, kind in ordered])
    coupling = sigma_n.sigma_n[rows, cols]
    penalized = np.where(positive, coupling > 0, coupling >= 0)
    df = decay_factor(t, max_iterations)
    probs = np.where(penalized, p_s * df, p_s) * np.abs(coupling)
    # One draw per candidate, in order
    keep = rng.random(len(ordered)) < probs
    return tuple((int(i), int(j)) for i, j in zip(rows[keep], cols[keep]))


def assemble_chains(selected: Sequence[Pair], x_b1) -> List[ChainSkeleton]:
    """Turn selected pairs into disjoint chains.

    Edges are taken in ascending order and any edge closing a cycle is
    dropped, so each connected component becomes a tree with
    ``size - 1`` kept pairs. The control is the highest-degree vertex of its
    tree (lowest index on ties); a target is POSITIVE when it matches the
    control's bit in the best parent.
    """
    best = as_bitstring(x_b1)
    forest = nx.Graph()
    components = nx.utils.UnionFind()
    for i, j in sorted(selected):
        if i == j or not (0 <= i < best.size and 0 <= j < best.size):
            raise UsageError(f"invalid pair ({i}, {j}) for {best.size} bits")
        # Skip edges that would close a cycle
        if components[i] == components[j]:
            continue
        components.union(i, j)
        forest.add_edge(i, j)

    # One chain per tree; the control is the hub
    chains = []
    for members in nx.connected_components(forest):
        control = min(members, key=lambda v: (-forest.degree[v], v))
        targets = tuple(
            (v, Parity.POSITIVE if best[v] == best[control] else Parity.NEGATIVE)
            for v in sorted(members)
            if v != control
        )
        chains.append(ChainSkeleton(control, targets))
    return sorted(chains, key=lambda c: c.control)


def _bias(bit: int, p_a: float) -> float:
    return p_a if bit == 1 else 1.0 - p_a


def build_plan(x_b1, chains: Sequence[ChainSkeleton], p_a: float) -> SamplingPlan:
    """Attach probabilities: every rotated qubit reproduces its best-parent bit with ``p_a``.

    Raises:
        PlanError: When chains overlap or leave the qubit range.
    """
    best = as_bitstring(x_b1)
    check_unit("p_a", p_a)
    used = set()
    built = []
    for skeleton in chains:
        members = [skeleton.control] + [i for i, _ in skeleton.targets]
        if used.intersection(members):
            raise PlanError(f"chain on control {skeleton.control} overlaps another chain")
        if any(not 0 <= i < best.size for i in members):
            raise PlanError(f"chain on control {skeleton.control} leaves [0, {best.size})")
        used.update(members)
        built.append(Chain(skeleton.control, _bias(int(best[skeleton.control]), p_a), skeleton.targets))
    # Every qubit outside a chain is rotated on its own
    independents = {i: _bias(int(best[i]), p_a) for i in range(best.size) if i not in used}
    return SamplingPlan(n=best.size, independents=independents, chains=tuple(built))


def crossover_plan(
    pool: ElitismPool,
    coupling: NormalizedCoupling,
    cfg: EaqgaConfig,
    t: int,
    rng: np.random.Generator,
) -> SamplingPlan:
    """One circuit of generation t built from the elitism pool."""
    candidates = detect_candidate_pairs(pool.best1.x, pool.best2.x)
    selected = select_pairs(candidates, coupling, cfg.p_s, t, cfg.max_iterations, rng)
    chains = assemble_chains(selected, pool.best1.x)
    return build_plan(pool.best1.x, chains, cfg.p_a)


GenerationHook = Callable[[int, ElitismPool, List[SamplingPlan]], None]


def run_eaqga(
    problem: QuboProblem,
    cfg: EaqgaConfig,
    on_generation: Optional[GenerationHook] = None,
    timing: bool = False,
) -> RunRecord:
    """Run EAQGA end to end.

    Generation 1 measures N Hadamard-layer circuits; every later generation t
    builds N fresh circuits from the pool with decay factor df(t).

    Args:
        problem: The QUBO instance.
        cfg: Hyperparameters and seed.
        on_generation: Optional hook called as ``hook(t, pool, plans)`` after
            each generation is measured.
        timing: Record wall-clock time in the result.

    Returns:
        RunRecord: Deterministic in ``cfg.seed`` (apart from ``wall_time``).
    """
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    coupling = normalize_coupling(problem)
    pool: Optional[ElitismPool] = None
    best_series: List[float] = []
    mean_series: List[float] = []

    for t in range(1, cfg.max_iterations + 1):
        # Hadamard layer first, then circuits built from the pool
        if pool is None:
            plans = [uniform_plan(problem.n)] * cfg.population
        else:
            plans = [crossover_plan(pool, coupling, cfg, t, rng) for _ in range(cfg.population)]
        # Measure each circuit once
        measured = [sample(plan, rng) for plan in plans]
        fitnesses = [evaluate_fitness(problem, x) for x in measured]
        # Update the elitism pool and record the generation
        pool = update_pool(pool, list(zip(measured, fitnesses)))
        best_series.append(pool.best1.fitness)
        mean_series.append(float(np.mean(fitnesses)))
        logger.debug(
            "EAQGA t=%d best=%.6g chains=%d",
            t,
            pool.best1.fitness,
            sum(len(p.chains) for p in plans),
        )
        if on_generation is not None:
            on_generation(t, pool, plans)

    return RunRecord(
        algorithm="EAQGA",
        seed=cfg.seed,
        problem_id=problem.problem_id,
        population=cfg.population,
        iterations=cfg.max_iterations,
        best_per_iteration=tuple(best_series),
        final_x=bits_to_str(pool.best1.x),
        final_fitness=pool.best1.fitness,
        wall_time=time.perf_counter() - started if timing else None,
        mean_per_iteration=tuple(mean_series),
        config=cfg.to_dict(),
    )
