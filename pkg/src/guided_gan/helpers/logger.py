# helpers/logger.py
import logging
import sys
import contextvars
from pathlib import Path
from typing import Optional

STEP = contextvars.ContextVar("step", default="-")
RUN = contextvars.ContextVar("run", default="-")

_FORMAT = "%(asctime)s %(levelname)s - %(name)s - run=%(run)s step=%(step)s - %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"

_loggers: dict[str, logging.Logger] = {}


class ContextFilter(logging.Filter):
    def filter(self, record):
        record.step = STEP.get()
        record.run = RUN.get()
        return True


def set_log_context(step=None, run=None):
    if step is not None:
        STEP.set(step)
    if run is not None:
        RUN.set(run)


def _decorate(handler: logging.Handler) -> logging.Handler:
    handler.setFormatter(logging.Formatter(_FORMAT, _DATEFMT))
    if not any(isinstance(f, ContextFilter) for f in getattr(handler, "filters", [])):
        handler.addFilter(ContextFilter())
    return handler


def setup_logger(name: str, level=logging.INFO) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not any(isinstance(h, logging.StreamHandler) for h in logger.handlers):
        logger.addHandler(logging.StreamHandler(sys.stdout))

    for h in logger.handlers:
        _decorate(h)

    logger.propagate = False
    _loggers[name] = logger
    return logger


def set_level(level) -> None:
    """Apply a level to every logger created through setup_logger."""
    for logger in _loggers.values():
        logger.setLevel(level)


def attach_file_handler(path: Path) -> logging.FileHandler:
    """Mirror every package logger into ``path`` until detach_file_handler is called."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = _decorate(logging.FileHandler(path, encoding="utf-8"))
    for logger in _loggers.values():
        logger.addHandler(handler)
    return handler


def detach_file_handler(handler: Optional[logging.FileHandler]) -> None:
    if handler is None:
        return
    for logger in _loggers.values():
        if handler in logger.handlers:
            logger.removeHandler(handler)
    handler.close()
