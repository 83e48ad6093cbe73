"""
Logging setup for the command-line front end.
Library modules only call logging.getLogger(__name__).
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

# Tables and log records go to stderr; stdout carries reports.
err_console = Console(stderr=True)


def setup_logging(level: str = "WARNING", verbose: int = 0, quiet: bool = False) -> None:
    if quiet:
        resolved = logging.ERROR
    elif verbose >= 2:
        resolved = logging.DEBUG
    elif verbose == 1:
        resolved = logging.INFO
    else:
        resolved = logging.getLevelName(str(level).upper())
        if not isinstance(resolved, int):
            resolved = logging.WARNING

    handler = RichHandler(console=err_console, show_path=False, rich_tracebacks=True)
    root = logging.getLogger("horizon_eval")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(resolved)
    root.propagate = False
