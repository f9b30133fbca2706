"""
Shared behaviour of the algorithm hyperparameter dataclasses.
"""

import dataclasses
from typing import Any, Dict, Mapping, TypeVar

from ..errors import UsageError

C = TypeVar("C", bound="AlgorithmConfig")


def check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise UsageError(f"{name} must lie in [0, 1], got {value}")


class AlgorithmConfig:
    """Mixin for frozen config dataclasses: dict round-trips."""

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls: type, data: Mapping[str, Any]) -> C:
        """Build from a mapping, rejecting unknown keys.

        Raises:
            UsageError: On unknown keys or invalid values.
        """
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise UsageError(f"invalid {cls.__name__}: {e}")
