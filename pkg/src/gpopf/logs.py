from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

_ROOT = "gpopf"

logging.getLogger(_ROOT).addHandler(logging.NullHandler())


def configure_logging(verbose: bool = False) -> None:
    """Route gpopf log records to stderr through rich. Idempotent."""
    logger = logging.getLogger(_ROOT)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for h in list(logger.handlers):
        if isinstance(h, RichHandler):
            logger.removeHandler(h)
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)
