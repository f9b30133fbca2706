"""
Main entry point for the eaqga command.
"""
import sys

from .cli import EXIT_USAGE, cli
from .config import configure_logging, load_settings
from .errors import UsageError


def main(argv=None):
    """Load settings, configure logging and run the command line."""
    # Load environment settings
    try:
        settings = load_settings()
    except UsageError as e:
        sys.stderr.write(f"eaqga: error: {e}\n")
        sys.exit(EXIT_USAGE)
    # Set up logging, then run the command
    configure_logging(settings.log_level)
    sys.exit(cli(argv, settings))


if __name__ == "__main__":
    main()
