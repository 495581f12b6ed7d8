"""Package logging: colored console output plus a rotating log file under the configured dir."""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

ROOT_LOGGER = "sdpnn"
FILE_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
CONSOLE_FORMAT = "[%(levelname)s] %(message)s"


class ColorFormatter(logging.Formatter):
    COLORS = {
        "DEBUG": "\033[90m",
        "INFO": "\033[94m",
        "WARNING": "\033[93m",
        "ERROR": "\033[91m",
        "CRITICAL": "\033[91m",
        "RESET": "\033[0m",
    }

    def format(self, record):
        msg = super().format(record)
        color = self.COLORS.get(record.levelname, "")
        return f"{color}{msg}{self.COLORS['RESET']}" if color else msg


def get_logger(name=ROOT_LOGGER):
    """Return a child of the package logger; handlers live on the root only."""
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)


def configure_logging(level="INFO", color=True, log_dir=None, stream=None):
    """Attach a rotating file handler and a console handler to the package logger.

    Safe to call more than once: previous handlers are replaced.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(logging.DEBUG)
    for h in list(logger.handlers):
        logger.removeHandler(h)
        h.close()

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(
            log_dir / "sdpnn.log", maxBytes=2_000_000, backupCount=5
        )
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(FILE_FORMAT))
        logger.addHandler(handler)

    ch = logging.StreamHandler(stream or sys.stderr)
    ch.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    fmt_cls = ColorFormatter if color else logging.Formatter
    ch.setFormatter(fmt_cls(CONSOLE_FORMAT))
    logger.addHandler(ch)
    logger.propagate = False
    return logger
