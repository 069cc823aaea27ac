"""Logging setup shared by every subcommand."""

from __future__ import annotations

import logging
import sys

LOG_FORMAT = "%(asctime)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
ROOT_LOGGER = "unickit"


def configure_logging(*, debug: bool = False) -> None:
    """Send package logs to stderr; DEBUG when requested, else WARNING."""
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(logging.DEBUG if debug else logging.WARNING)
    if not any(
        getattr(handler, "_unickit", False) for handler in logger.handlers
    ):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
        handler._unickit = True  # type: ignore[attr-defined]  # noqa: SLF001
        logger.addHandler(handler)
    logger.propagate = False


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
