"""
Per-run trace shared by EAQGA and the baselines.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

from ..errors import DataError

ALGORITHMS = ("EAQGA", "GA", "AQGA")


@dataclass(frozen=True)
class RunRecord:
    """Seeded trace of one algorithm run.

    ``best_per_iteration[t-1]`` is the best fitness found up to and including
    generation t; ``mean_per_iteration`` is the mean fitness of generation t
    alone. ``wall_time`` is None when timing is not recorded.
    """

    algorithm: str
    seed: int
    problem_id: str
    population: int
    iterations: int
    best_per_iteration: Tuple[float, ...]
    final_x: str
    final_fitness: float
    wall_time: Optional[float] = None
    mean_per_iteration: Tuple[float, ...] = ()
    config: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self, timing: bool = True) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "problem_id": self.problem_id,
            "population": self.population,
            "iterations": self.iterations,
            "best_per_iteration": list(self.best_per_iteration),
            "final_x": self.final_x,
            "final_fitness": self.final_fitness,
            "wall_time": self.wall_time if timing else None,
            "mean_per_iteration": list(self.mean_per_iteration),
            "config": dict(self.config),
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing=timing), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunRecord":
        try:
            return cls(
                algorithm=str(data["algorithm"]),
                seed=int(data["seed"]),
                problem_id=str(data["problem_id"]),
                population=int(data["population"]),
                iterations=int(data["iterations"]),
                best_per_iteration=tuple(float(v) for v in data["best_per_iteration"]),
                final_x=str(data["final_x"]),
                final_fitness=float(data["final_fitness"]),
                wall_time=None if data.get("wall_time") is None else float(data["wall_time"]),
                mean_per_iteration=tuple(float(v) for v in data.get("mean_per_iteration", ())),
                config=dict(data.get("config") or {}),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed run record: {e}")
