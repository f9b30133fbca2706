"""
Environment settings for the EAQGA tools.

Values come from the process environment, optionally seeded from a ``.env``
file in the working directory (see ``.env.example``).
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from .errors import UsageError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

DEFAULT_THREADS = 1
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_ORACLE_LIMIT = 26


@dataclass(frozen=True)
class Settings:
    """Process-wide settings read from the environment."""

    threads: int = DEFAULT_THREADS
    log_level: str = DEFAULT_LOG_LEVEL
    oracle_limit: int = DEFAULT_ORACLE_LIMIT


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise UsageError(f"{name} must be >= 1, got {value}")
    return value


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Load settings from the environment.

    Args:
        env_file: Optional path to a dotenv file. When omitted, a ``.env`` in
            the working directory is used if present. Variables already set in
            the environment win over the file.

    Returns:
        Settings: The resolved settings.
    """
    # Load the .env file without overriding the environment
    load_dotenv(env_file)

    # Validate the log level name
    level = (os.getenv("EAQGA_LOG_LEVEL") or DEFAULT_LOG_LEVEL).strip().upper()
    if not isinstance(logging.getLevelName(level), int):
        raise UsageError(f"EAQGA_LOG_LEVEL: unknown level {level!r}")

    return Settings(
        threads=_positive_int("EAQGA_THREADS", DEFAULT_THREADS),
        log_level=level,
        oracle_limit=_positive_int("EAQGA_ORACLE_LIMIT", DEFAULT_ORACLE_LIMIT),
    )


def configure_logging(level: str = DEFAULT_LOG_LEVEL) -> None:
    """Configure root logging once for command line use."""
    logging.basicConfig(level=level, format=LOG_FORMAT)
