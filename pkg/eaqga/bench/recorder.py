"""
Writes experiment outputs to a results directory.
"""

import json
import logging
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

from .. import __version__
from ..core.records import RunRecord
from .report import SummaryRow, emit_convergence, emit_table, improvement_summary

logger = logging.getLogger(__name__)

STD_CONVENTION = "population standard deviation (divide by repeats)"
CONVERGENCE_DEFINITION = "mean over repeats of the best-so-far fitness at each iteration"


class ResultRecorder:
    """Handles writing run records, tables and metadata under one directory.

    Layout::

        runs/<problem_id>/<algo>_pop<N>_r<rep>.json
        summary.csv
        convergence_<problem_id>_pop<N>.csv
        metadata.json
    """

    def __init__(self, base_dir: Optional[str] = None, timing: bool = False):
        """Initialize the recorder.

        Args:
            base_dir: Output directory; ``./results`` when None. Created if missing.
            timing: Keep ``wall_time`` in the raw records.
        """
        # Set up the results directory
        self.base_dir = base_dir or os.path.join(os.getcwd(), "results")
        self.timing = timing
        self.written: List[str] = []
        os.makedirs(self.base_dir, exist_ok=True)

    def _write(self, relative: str, text: str) -> str:
        # Create parent directories as needed
        path = os.path.join(self.base_dir, relative)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        self.written.append(path)
        return path

    def write_run(self, record: RunRecord, repeat: int) -> str:
        relative = os.path.join("runs", record.problem_id, f"{record.algorithm}_pop{record.population}_r{repeat}.json")
        return self._write(relative, record.to_json(timing=self.timing))

    def write_summary(self, rows: Sequence[SummaryRow], scale: float = 1.0, include_average: bool = False) -> str:
        path = self._write("summary.csv", emit_table(rows, scale=scale, include_average=include_average))
        logger.info("summary table written to %s", path)
        return path

    def write_convergence(self, records: Sequence[RunRecord]) -> List[str]:
        """One convergence CSV per (problem, population)."""
        groups: Dict[tuple, List[RunRecord]] = {}
        for record in records:
            groups.setdefault((record.problem_id, record.population), []).append(record)
        return [
            self._write(f"convergence_{problem_id}_pop{population}.csv", emit_convergence(group))
            for (problem_id, population), group in groups.items()
        ]

    def write_metadata(self, config: Mapping[str, Any], rows: Sequence[SummaryRow]) -> str:
        # Cells that failed, with the first error
        failures = [
            {"problem_id": r.problem_id, "algo": r.algorithm, "population": r.population, "error": r.error}
            for r in rows
            if r.error
        ]
        metadata = {
            "version": __version__,
            "std": STD_CONVENTION,
            "convergence": CONVERGENCE_DEFINITION,
            "config": dict(config),
            "failures": failures,
            # Percent gain per (problem, population) cell
            "improvement": improvement_summary(rows),
        }
        return self._write("metadata.json", json.dumps(metadata, sort_keys=True, indent=2) + "\n")

    def write_experiment(self, result, config: Mapping[str, Any], scale: float = 1.0) -> List[str]:
        """Write every output of a finished experiment in a fixed order."""
        for record, repeat in zip(result.records, result.repeats):
            self.write_run(record, repeat)
        self.write_summary(result.rows, scale=scale, include_average=len(result.problems) > 1)
        if result.records:
            self.write_convergence(result.records)
        self.write_metadata(config, result.rows)
        logger.info("wrote %d file(s) to %s", len(self.written), self.base_dir)
        return list(self.written)
