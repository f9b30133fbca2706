"""
Exhaustive ground-truth search for desk-scale QUBO problems.

Variables are split into a leading "high" part walked in Gray-code order and a
trailing "low" block of up to 12 bits evaluated as one vector per high step.
A Gray step flips a single high variable, so the high-only fitness and the
high/low cross terms are updated in O(n + 2^m) instead of re-evaluated.
"""

import logging
import math
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..config import DEFAULT_ORACLE_LIMIT
from ..errors import OracleLimitError, UsageError
from .problem import QuboProblem, bit_table, bits_to_str, evaluate_fitness

logger = logging.getLogger(__name__)

LOW_BLOCK_BITS = 12
REANCHOR_SPAN = 1 << 16
STEP_CANDIDATES = 8
GLOBAL_CANDIDATES = 64


class OracleResult(NamedTuple):
    best_x: np.ndarray
    best_fitness: float
    evaluated_count: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best_x": bits_to_str(self.best_x),
            "fitness": self.best_fitness,
            "count": self.evaluated_count,
        }


def decode(code: int, n: int) -> np.ndarray:
    """Bit vector of an integer code, x[0] most significant."""
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((np.int64(code) >> shifts) & 1).astype(np.uint8)


def _check_limit(problem: QuboProblem, n_limit: Optional[int]) -> None:
    limit = DEFAULT_ORACLE_LIMIT if n_limit is None else n_limit
    if problem.n > limit:
        raise OracleLimitError(f"exhaustive search refused: n={problem.n} exceeds limit {limit}")


def _tolerance(problem: QuboProblem) -> float:
    scale = float(np.abs(problem.mu).sum() + problem.q * np.abs(problem.sigma).sum())
    return 1e-9 * max(1.0, scale)


def _high_terms(problem: QuboProblem, h: np.ndarray, cross: np.ndarray) -> Tuple[float, np.ndarray]:
    k = h.size
    hf = h.astype(float)
    f_hi = float(problem.mu[:k] @ hf - problem.q * (hf @ problem.sigma[:k, :k] @ hf))
    return f_hi, cross @ hf


def iter_block_fitness(
    problem: QuboProblem,
    prefix: Sequence[int] = (),
    low_bits: int = LOW_BLOCK_BITS,
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Walk every bitstring starting with ``prefix``.

    Yields one ``(codes, values)`` pair per high Gray step: the integer codes of
    the ``2**m`` bitstrings sharing the current high assignment, and their
    incrementally maintained fitness. The running terms are recomputed from
    scratch every 2**16 bitstrings.
    """
    n = problem.n
    p = len(prefix)
    if p > n:
        raise UsageError(f"prefix of {p} bits is longer than n={n}")
    m = min(n - p, max(0, low_bits))
    k = n - m
    q = problem.q
    mu, sigma = problem.mu, problem.sigma

    # Fitness and cross terms of the vectorized low block
    lo = bit_table(m).astype(float)
    f_lo = lo @ mu[k:] - q * np.einsum("ij,jk,ik->i", lo, sigma[k:, k:], lo)
    cross = lo @ sigma[k:, :k]
    low_codes = np.arange(1 << m, dtype=np.int64)
    reanchor = max(1, REANCHOR_SPAN >> m)

    h = np.zeros(k, dtype=np.uint8)
    h[:p] = np.asarray(prefix, dtype=np.uint8)
    hcode = 0
    for bit in h:
        hcode = (hcode << 1) | int(bit)
    f_hi, cross_h = _high_terms(problem, h, cross)

    for step in range(1 << (k - p)):
        if step:
            b = (step & -step).bit_length() - 1
            v = k - 1 - b
            # Periodic recomputation from scratch
            if step % reanchor == 0:
                h[v] ^= 1
                f_hi, cross_h = _high_terms(problem, h, cross)
            else:
                sign = 1.0 if h[v] == 0 else -1.0
                others = float(sigma[v, :k] @ h) - sigma[v, v] * h[v]
                f_hi += sign * (mu[v] - q * (sigma[v, v] + 2.0 * others))
                cross_h = cross_h + sign * cross[:, v]
                h[v] ^= 1
            hcode ^= 1 << b
        yield (hcode << m) | low_codes, f_hi + f_lo - 2.0 * q * cross_h


def _search_block(problem: QuboProblem, prefix: Tuple[int, ...], low_bits: int) -> Tuple[float, int]:
    """Best (fitness, code) within one prefix block, ties to the smallest code.

    Near-ties under the incremental values are kept and settled with a direct
    evaluation, so the answer matches a plain enumeration.
    """
    tol = _tolerance(problem)
    best = -math.inf
    kept: List[Tuple[float, int]] = []
    for codes, values in iter_block_fitness(problem, prefix, low_bits):
        top = float(values.max())
        if top < best - tol:
            continue
        best = max(best, top)
        near = np.flatnonzero(values >= best - tol)
        near = near[np.lexsort((codes[near], -values[near]))][:STEP_CANDIDATES]
        kept.extend(zip(values[near].tolist(), codes[near].tolist()))
        kept = sorted((c for c in kept if c[0] >= best - tol), key=lambda c: (-c[0], c[1]))[:GLOBAL_CANDIDATES]

    # Settle near-ties with a direct evaluation
    refined = [(evaluate_fitness(problem, decode(code, problem.n)), code) for _, code in kept]
    return max(refined, key=lambda r: (r[0], -r[1]))


def brute_force(
    problem: QuboProblem,
    n_limit: Optional[int] = None,
    blocks: int = 1,
    workers: int = 1,
    low_bits: int = LOW_BLOCK_BITS,
) -> OracleResult:
    """Exact maximum over all ``2**n`` bitstrings.

    Args:
        problem: The QUBO instance.
        n_limit: Largest n accepted; defaults to 26.
        blocks: Number of prefix blocks (a power of two, at most ``2**n``),
            each enumerated independently from a full evaluation.
        workers: Parallel workers for the blocks.
        low_bits: Width of the vectorized trailing block.

    Returns:
        OracleResult: The maximizer, lexicographically smallest among ties,
        with ``best_fitness == evaluate_fitness(problem, best_x)``.

    Raises:
        OracleLimitError: When ``n > n_limit``.
        UsageError: On an invalid block count.
    """
    _check_limit(problem, n_limit)
    if blocks < 1 or blocks & (blocks - 1):
        raise UsageError(f"blocks must be a power of two, got {blocks}")
    prefix_bits = blocks.bit_length() - 1
    if prefix_bits > problem.n:
        raise UsageError(f"{blocks} blocks exceed the 2^{problem.n} search space")
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers}")

    # Each prefix block starts from a full evaluation
    prefixes = [tuple(int(b) for b in row) for row in bit_table(prefix_bits)]
    logger.info("oracle: n=%d, %d block(s), %d worker(s)", problem.n, blocks, workers)
    if workers == 1 or blocks == 1:
        results = [_search_block(problem, prefix, low_bits) for prefix in prefixes]
    else:
        results = Parallel(n_jobs=workers)(delayed(_search_block)(problem, prefix, low_bits) for prefix in prefixes)

    # Ties go to the smallest code
    fitness, code = max(results, key=lambda r: (r[0], -r[1]))
    best_x = decode(code, problem.n)
    return OracleResult(best_x=best_x, best_fitness=fitness, evaluated_count=1 << problem.n)


def naive_enumerate(problem: QuboProblem, n_limit: Optional[int] = None) -> OracleResult:
    """Direct evaluation of every bitstring in lexicographic order.

    Only a strictly better fitness replaces the incumbent.
    """
    _check_limit(problem, n_limit)
    best_x, best_fitness = None, -math.inf
    for x in bit_table(problem.n):
        f = evaluate_fitness(problem, x)
        if f > best_fitness:
            best_x, best_fitness = x, f
    return OracleResult(best_x=np.array(best_x, dtype=np.uint8), best_fitness=best_fitness, evaluated_count=1 << problem.n)
