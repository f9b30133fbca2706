"""
Comparison algorithms: a classical genetic algorithm and the self-adaptive
quantum-inspired GA (AQGA) with determinant-signed rotations.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import UsageError
from .params import AlgorithmConfig, check_unit
from .problem import QuboProblem, bits_key, bits_to_str, evaluate_fitness
from .records import RunRecord

logger = logging.getLogger(__name__)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class GaConfig(AlgorithmConfig):
    """Classical GA settings.

    ``per_bit_mutation`` switches from "one random bit per offspring with
    probability mutation_rate" to "every bit independently with mutation_rate".
    """

    population: int = 10
    max_iterations: int = 20
    crossover_prob: float = 0.85
    mutation_rate: float = 0.03
    elite_count: int = 2
    per_bit_mutation: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise UsageError(f"population must be >= 2, got {self.population}")
        if self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")
        check_unit("crossover_prob", self.crossover_prob)
        check_unit("mutation_rate", self.mutation_rate)
        if not 0 <= self.elite_count <= self.population:
            raise UsageError(f"elite_count must lie in [0, population], got {self.elite_count}")


@dataclass(frozen=True)
class AqgaConfig(AlgorithmConfig):
    """AQGA settings: rotation magnitude bounds, swap mutation and disaster reset."""

    population: int = 10
    max_iterations: int = 20
    theta_max: float = 0.25
    theta_min: float = 0.15
    mutation_ratio: float = 0.05
    disaster_stale_iters: int = 6
    disaster_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise UsageError(f"population must be >= 2, got {self.population}")
        if self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.theta_max >= self.theta_min >= 0:
            raise UsageError(f"need theta_max >= theta_min >= 0, got {self.theta_max}, {self.theta_min}")
        check_unit("mutation_ratio", self.mutation_ratio)
        check_unit("disaster_fraction", self.disaster_fraction)
        if self.disaster_stale_iters < 1:
            raise UsageError(f"disaster_stale_iters must be >= 1, got {self.disaster_stale_iters}")


def _best_index(population: np.ndarray, fitnesses: Sequence[float]) -> int:
    return min(range(len(fitnesses)), key=lambda k: (-fitnesses[k], bits_key(population[k])))


class _BestTracker:
    """Best-so-far solution with lexicographic tie-break."""

    def __init__(self):
        self.x: Optional[np.ndarray] = None
        self.fitness = -math.inf

    def offer(self, x: np.ndarray, fitness: float) -> bool:
        """Returns True when the best fitness strictly improved."""
        improved = fitness > self.fitness
        if improved or (fitness == self.fitness and bits_key(x) < bits_key(self.x)):
            self.x = np.array(x, dtype=np.uint8)
            self.fitness = float(fitness)
        return improved


# ---------------------------------------------------------------------------
# Classical GA
# ---------------------------------------------------------------------------


def roulette_weights(fitnesses: Sequence[float]) -> np.ndarray:
    """Selection probabilities from fitness shifted to be non-negative.

    Weights are ``f - min(f) + eps`` with ``eps = 1e-12 * max(1, span)``; an
    all-equal population selects uniformly.
    """
    f = np.asarray(fitnesses, dtype=float)
    span = float(f.max() - f.min())
    if span == 0.0:
        return np.full(f.size, 1.0 / f.size)
    weights = f - f.min() + 1e-12 * max(1.0, span)
    return weights / weights.sum()


def single_point_crossover(a: np.ndarray, b: np.ndarray, cut: int) -> Tuple[np.ndarray, np.ndarray]:
    """Swap tails after position ``cut``: ``a[:cut] + b[cut:]`` and ``b[:cut] + a[cut:]``."""
    return (
        np.concatenate([a[:cut], b[cut:]]).astype(np.uint8),
        np.concatenate([b[:cut], a[cut:]]).astype(np.uint8),
    )


def _mutate_bits(child: np.ndarray, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.per_bit_mutation:
        flips = rng.random(child.size) < cfg.mutation_rate
        return child ^ flips.astype(np.uint8)
    if rng.random() < cfg.mutation_rate:
        child = child.copy()
        child[rng.integers(child.size)] ^= 1
    return child


def ga_step(
    population: np.ndarray,
    fitnesses: Sequence[float],
    cfg: GaConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Produce the next generation.

    Elites are copied unchanged; the remaining slots are filled with roulette-
    selected parent pairs, single-point crossover and bit-flip mutation.
    """
    population = np.asarray(population, dtype=np.uint8)
    if population.ndim != 2 or population.shape[0] == 0:
        raise UsageError("population must be a non-empty (N, n) array")
    size, n = population.shape
    order = sorted(range(size), key=lambda k: (-fitnesses[k], bits_key(population[k])))
    offspring: List[np.ndarray] = [population[k].copy() for k in order[: cfg.elite_count]]

    probs = roulette_weights(fitnesses)
    while len(offspring) < size:
        i, j = rng.choice(size, size=2, p=probs)
        a, b = population[i], population[j]
        if n > 1 and rng.random() < cfg.crossover_prob:
            a, b = single_point_crossover(a, b, int(rng.integers(1, n)))
        for child in (a, b):
            if len(offspring) < size:
                offspring.append(_mutate_bits(child.copy(), cfg, rng))
    return np.stack(offspring)


def run_ga(problem: QuboProblem, cfg: GaConfig, timing: bool = False) -> RunRecord:
    """Classical GA from uniform random bitstrings."""
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    population = rng.integers(0, 2, size=(cfg.population, problem.n), dtype=np.uint8)
    best = _BestTracker()
    best_series: List[float] = []
    mean_series: List[float] = []

    for t in range(1, cfg.max_iterations + 1):
        fitnesses = [evaluate_fitness(problem, x) for x in population]
        k = _best_index(population, fitnesses)
        best.offer(population[k], fitnesses[k])
        best_series.append(best.fitness)
        mean_series.append(float(np.mean(fitnesses)))
        logger.debug("GA t=%d best=%.6g", t, best.fitness)
        if t < cfg.max_iterations:
            population = ga_step(population, fitnesses, cfg, rng)

    return RunRecord(
        algorithm="GA",
        seed=cfg.seed,
        problem_id=problem.problem_id,
        population=cfg.population,
        iterations=cfg.max_iterations,
        best_per_iteration=tuple(best_series),
        final_x=bits_to_str(best.x),
        final_fitness=best.fitness,
        wall_time=time.perf_counter() - started if timing else None,
        mean_per_iteration=tuple(mean_series),
        config=cfg.to_dict(),
    )


# ---------------------------------------------------------------------------
# AQGA
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AmplitudeChromosome:
    """Per-gene amplitudes; gene j measures 1 with probability ``beta[j]**2``."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        beta = np.array(self.beta, dtype=float)
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise UsageError("alpha and beta must be vectors of equal length")
        if np.abs(alpha**2 + beta**2 - 1.0).max(initial=0.0) > 1e-9:
            raise UsageError("every gene must satisfy alpha^2 + beta^2 = 1")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def superposition(cls, n: int) -> "AmplitudeChromosome":
        return cls(np.full(n, INV_SQRT2), np.full(n, INV_SQRT2))

    @property
    def genes(self) -> List[Tuple[float, float]]:
        return list(zip(self.alpha.tolist(), self.beta.tolist()))

    @property
    def n(self) -> int:
        return int(self.alpha.size)


def aqga_measure(chromosome: AmplitudeChromosome, rng: np.random.Generator) -> np.ndarray:
    """Collapse each gene independently: 1 with probability ``beta**2``."""
    return (rng.random(chromosome.n) < chromosome.beta**2).astype(np.uint8)


def rotation_magnitude(iteration: int, cfg: AqgaConfig) -> float:
    """Adaptive angle, shrinking linearly from theta_max (iter 0) to theta_min (iter T_max)."""
    return cfg.theta_max - (cfg.theta_max - cfg.theta_min) * iteration / cfg.max_iterations


def rotation_direction(chromosome: AmplitudeChromosome, x_best, rng: np.random.Generator) -> np.ndarray:
    """Per-gene direction ``-sgn(D)`` with ``D = alpha_b * beta - beta_b * alpha``.

    The best solution's bits embed as (1, 0) for 0 and (0, 1) for 1; a zero
    determinant picks +1 or -1 uniformly.
    """
    best = np.asarray(x_best, dtype=float)
    det = (1.0 - best) * chromosome.beta - best * chromosome.alpha
    direction = -np.sign(det)
    ties = direction == 0
    if ties.any():
        direction[ties] = np.where(rng.random(int(ties.sum())) < 0.5, -1.0, 1.0)
    return direction


def aqga_rotation(
    chromosome: AmplitudeChromosome,
    x_best,
    iteration: int,
    cfg: AqgaConfig,
    rng: np.random.Generator,
) -> AmplitudeChromosome:
    """Rotate every gene toward the best solution by the adaptive magnitude."""
    if not 0 <= iteration <= cfg.max_iterations:
        raise UsageError(f"iteration {iteration} outside [0, {cfg.max_iterations}]")
    delta = rotation_direction(chromosome, x_best, rng) * rotation_magnitude(iteration, cfg)
    cos, sin = np.cos(delta), np.sin(delta)
    a, b = chromosome.alpha, chromosome.beta
    return AmplitudeChromosome(cos * a - sin * b, sin * a + cos * b)


def aqga_mutate(chromosome: AmplitudeChromosome, rate: float, rng: np.random.Generator) -> AmplitudeChromosome:
    """With probability ``rate``, swap alpha and beta of one random gene."""
    check_unit("rate", rate)
    if rng.random() >= rate:
        return chromosome
    j = int(rng.integers(chromosome.n))
    alpha, beta = chromosome.alpha.copy(), chromosome.beta.copy()
    alpha[j], beta[j] = beta[j], alpha[j]
    return AmplitudeChromosome(alpha, beta)


def aqga_disaster(
    chromosomes: Sequence[AmplitudeChromosome],
    fitnesses: Sequence[float],
    stale_counter: int,
    cfg: AqgaConfig,
    improved: bool,
) -> Tuple[List[AmplitudeChromosome], int]:
    """Track stagnation and reset the worst chromosomes when it lasts too long.

    Args:
        chromosomes: Current population.
        fitnesses: Fitness of each chromosome's latest measurement.
        stale_counter: Generations without improvement so far.
        cfg: Disaster thresholds.
        improved: Whether the global best fitness changed this generation.

    Returns:
        The (possibly reset) population and the new counter. When the counter
        reaches ``disaster_stale_iters`` the ``floor(fraction * N)`` lowest-
        fitness chromosomes return to equal superposition and the counter is 0.
    """
    stale_counter = 0 if improved else stale_counter + 1
    chromosomes = list(chromosomes)
    if stale_counter < cfg.disaster_stale_iters:
        return chromosomes, stale_counter

    count = int(math.floor(cfg.disaster_fraction * len(chromosomes)))
    worst = np.argsort(np.asarray(fitnesses, dtype=float), kind="stable")[:count]
    for k in worst:
        chromosomes[k] = AmplitudeChromosome.superposition(chromosomes[k].n)
    logger.debug("AQGA disaster: reset %d chromosomes", count)
    return chromosomes, 0


def run_aqga(problem: QuboProblem, cfg: AqgaConfig, timing: bool = False) -> RunRecord:
    """AQGA from equal superposition: measure, rotate toward the best, mutate, disaster."""
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    chromosomes = [AmplitudeChromosome.superposition(problem.n) for _ in range(cfg.population)]
    best = _BestTracker()
    stale = 0
    best_series: List[float] = []
    mean_series: List[float] = []

    for t in range(1, cfg.max_iterations + 1):
        measured = np.stack([aqga_measure(c, rng) for c in chromosomes])
        fitnesses = [evaluate_fitness(problem, x) for x in measured]
        k = _best_index(measured, fitnesses)
        improved = best.offer(measured[k], fitnesses[k])
        best_series.append(best.fitness)
        mean_series.append(float(np.mean(fitnesses)))
        logger.debug("AQGA t=%d best=%.6g stale=%d", t, best.fitness, stale)
        if t == cfg.max_iterations:
            break
        chromosomes = [aqga_rotation(c, best.x, t - 1, cfg, rng) for c in chromosomes]
        chromosomes = [aqga_mutate(c, cfg.mutation_ratio, rng) for c in chromosomes]
        chromosomes, stale = aqga_disaster(chromosomes, fitnesses, stale, cfg, improved or t == 1)

    return RunRecord(
        algorithm="AQGA",
        seed=cfg.seed,
        problem_id=problem.problem_id,
        population=cfg.population,
        iterations=cfg.max_iterations,
        best_per_iteration=tuple(best_series),
        final_x=bits_to_str(best.x),
        final_fitness=best.fitness,
        wall_time=time.perf_counter() - started if timing else None,
        mean_per_iteration=tuple(mean_series),
        config=cfg.to_dict(),
    )
