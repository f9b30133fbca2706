"""
Aggregation of run records into summary tables and convergence series.
"""

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.records import RunRecord
from ..errors import UsageError

TABLE_HEADER = ("problem_id", "optimum", "algo", "population", "avg", "std")
CONVERGENCE_HEADER = ("iteration", "algo", "mean_best", "std_best")
AVERAGE_ROW_ID = "Average"

Cell = Tuple[str, str, int]


@dataclass(frozen=True)
class SummaryRow:
    """Final-fitness statistics of one (problem, algorithm, population) cell.

    ``std`` is the population standard deviation over repeats. ``avg`` and
    ``std`` are None when the cell failed; ``error`` then holds the reason.
    """

    problem_id: str
    optimum: Optional[float]
    algorithm: str
    population: int
    iterations: int
    avg: Optional[float]
    std: Optional[float]
    repeats: int
    error: Optional[str] = None


def summarize(
    records: Iterable[RunRecord],
    cells: Optional[Sequence[Cell]] = None,
    optima: Optional[Mapping[str, Optional[float]]] = None,
    errors: Optional[Mapping[Cell, str]] = None,
) -> List[SummaryRow]:
    """One row per cell, in ``cells`` order (first appearance in ``records`` when omitted)."""
    groups: "OrderedDict[Cell, List[RunRecord]]" = OrderedDict((cell, []) for cell in cells or ())
    for record in records:
        groups.setdefault((record.problem_id, record.algorithm, record.population), []).append(record)
    optima = optima or {}
    errors = errors or {}

    rows = []
    for cell, group in groups.items():
        problem_id, algorithm, population = cell
        error = errors.get(cell)
        if not group and error is None:
            error = "no completed runs"
        finals = np.array([r.final_fitness for r in group], dtype=float)
        failed = error is not None
        rows.append(
            SummaryRow(
                problem_id=problem_id,
                optimum=optima.get(problem_id),
                algorithm=algorithm,
                population=population,
                iterations=group[0].iterations if group else 0,
                avg=None if failed else float(finals.mean()),
                std=None if failed else float(finals.std(ddof=0)),
                repeats=len(group),
                error=error,
            )
        )
    return rows


def _fmt(value: Optional[float], scale: float) -> str:
    return "" if value is None else f"{value * scale:.4f}"


def _average_rows(rows: Sequence[SummaryRow]) -> List[SummaryRow]:
    groups: "OrderedDict[Tuple[str, int], List[SummaryRow]]" = OrderedDict()
    for row in rows:
        if not row.error:
            groups.setdefault((row.algorithm, row.population), []).append(row)
    averaged = []
    for (algorithm, population), group in groups.items():
        optima = [r.optimum for r in group]
        averaged.append(
            SummaryRow(
                problem_id=AVERAGE_ROW_ID,
                optimum=None if None in optima else float(np.mean(optima)),
                algorithm=algorithm,
                population=population,
                iterations=group[0].iterations,
                avg=float(np.mean([r.avg for r in group])),
                std=None,
                repeats=sum(r.repeats for r in group),
            )
        )
    return averaged


def emit_table(rows: Sequence[SummaryRow], scale: float = 1.0, include_average: bool = False) -> str:
    """Render summary rows as CSV with 4-decimal values multiplied by ``scale``.

    With ``include_average`` an ``Average`` row per (algorithm, population)
    follows, averaging ``avg`` (and the optima when all are known) over
    problems; its ``std`` is left blank.
    """
    if not rows:
        raise UsageError("no summary rows to emit")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    body = list(rows) + (_average_rows(rows) if include_average else [])
    for row in body:
        writer.writerow(
            [row.problem_id, _fmt(row.optimum, scale), row.algorithm, row.population, _fmt(row.avg, scale), _fmt(row.std, scale)]
        )
    return out.getvalue()


def emit_convergence(records: Sequence[RunRecord]) -> str:
    """Per-iteration mean and population std of the best-so-far series, per algorithm.

    Raises:
        UsageError: When records are empty or disagree on the iteration count.
    """
    if not records:
        raise UsageError("no records to aggregate")
    lengths = {len(r.best_per_iteration) for r in records}
    if len(lengths) != 1:
        raise UsageError(f"records mix iteration counts {sorted(lengths)}")

    by_algo: "OrderedDict[str, List[Tuple[float, ...]]]" = OrderedDict()
    for record in records:
        by_algo.setdefault(record.algorithm, []).append(record.best_per_iteration)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONVERGENCE_HEADER)
    for algorithm, series in by_algo.items():
        matrix = np.array(series, dtype=float)
        means = matrix.mean(axis=0)
        stds = matrix.std(axis=0, ddof=0)
        for t, (mean, std) in enumerate(zip(means, stds), start=1):
            writer.writerow([t, algorithm, repr(float(mean)), repr(float(std))])
    return out.getvalue()


def relative_improvement(rows: Sequence[SummaryRow], algorithm: str, baseline: str) -> Dict[Tuple[str, int], float]:
    """Percentage gain of ``algorithm`` over ``baseline`` per (problem, population).

    ``(avg_algo - avg_base) / |avg_base| * 100``; NaN when the baseline
    average is zero. Failed or unmatched cells are omitted.
    """
    index = {(r.problem_id, r.algorithm, r.population): r for r in rows if not r.error}
    gains = {}
    for (problem_id, algo, population), row in index.items():
        if algo != algorithm:
            continue
        base = index.get((problem_id, baseline, population))
        if base is None:
            continue
        gains[(problem_id, population)] = (
            math.nan if base.avg == 0 else (row.avg - base.avg) / abs(base.avg) * 100.0
        )
    return gains


def improvement_summary(
    rows: Sequence[SummaryRow], algorithm: str = "EAQGA", baselines: Sequence[str] = ("GA", "AQGA")
) -> Dict[str, List[Dict[str, object]]]:
    """JSON-ready gains of ``algorithm`` over each baseline present in ``rows``."""
    present = {r.algorithm for r in rows}
    if algorithm not in present:
        return {}
    summary = {}
    for baseline in baselines:
        if baseline not in present:
            continue
        gains = relative_improvement(rows, algorithm, baseline)
        # NaN is not valid JSON
        summary[f"{algorithm}_vs_{baseline}"] = [
            {"problem_id": pid, "population": population, "percent": None if math.isnan(g) else g}
            for (pid, population), g in gains.items()
        ]
    return summary
