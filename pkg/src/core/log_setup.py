"""Logging for the command line and the library modules.

Library modules log under ``src.*`` and the CLI under ``post-dantzig``.
The ``TRACE`` level sits below DEBUG and carries per-pivot simplex output
and per-repetition timings; it reaches the terminal only with
``--trace --verbose`` and otherwise goes to a file under ``debug/``.
Bench worker processes get a console handler of their own through
``worker_logging`` and never write to the trace file.
"""
from __future__ import annotations

import logging
from datetime import datetime
from pathlib import Path

TRACE = 5
TRACE_DIR = "debug"
CLI_LOGGER = "post-dantzig"
LIBRARY_LOGGER = "src"

logging.addLevelName(TRACE, "TRACE")

_CONSOLE_FMT = "%(levelname)s %(name)s: %(message)s"
_WORKER_FMT = "%(levelname)s [%(processName)s] %(name)s: %(message)s"
_FILE_FMT = "%(asctime)s.%(msecs)03d %(levelname)s %(name)s:%(funcName)s:%(lineno)d %(message)s"
_FILE_DATEFMT = "%Y-%m-%d %H:%M:%S"


def console_level(*, debug: bool, trace: bool, verbose: bool) -> int:
    """Terminal level for the CLI flags."""
    if trace and verbose:
        return TRACE
    if debug or trace:
        return logging.DEBUG
    return logging.INFO


def trace_file_path(command: str | None = None) -> Path:
    """debug/trace-[<command>-]<timestamp>.log"""
    stamp = datetime.now().strftime("%Y-%m-%dT%H-%M-%S")
    name = f"trace-{command}-{stamp}.log" if command else f"trace-{stamp}.log"
    return Path(TRACE_DIR) / name


def _reset(logger: logging.Logger) -> None:
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()
    logger.setLevel(TRACE)


def effective_console_level() -> int:
    """Level of the library console handler, WARNING when logging is not set up."""
    levels = [
        h.level for h in logging.getLogger(LIBRARY_LOGGER).handlers
        if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
    ]
    return min(levels) if levels else logging.WARNING


def setup_logging(
    *, debug: bool, trace: bool, verbose: bool, command: str | None = None
) -> logging.Logger:
    """Attach the console (and with ``trace`` the file) handler; return the CLI logger.

    Calling it again replaces the handlers of the previous call.
    """
    console = logging.StreamHandler()
    console.setLevel(console_level(debug=debug, trace=trace, verbose=verbose))
    console.setFormatter(logging.Formatter(_CONSOLE_FMT))

    loggers = [logging.getLogger(CLI_LOGGER), logging.getLogger(LIBRARY_LOGGER)]
    for lg in loggers:
        _reset(lg)
        lg.addHandler(console)

    cli = loggers[0]
    if trace:
        path = trace_file_path(command)
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(path)
        fh.setLevel(TRACE)
        fh.setFormatter(logging.Formatter(_FILE_FMT, datefmt=_FILE_DATEFMT))
        for lg in loggers:
            lg.addHandler(fh)
        cli.debug("Trace file: %s", path)
    return cli


def worker_logging(level: int) -> None:
    """ProcessPoolExecutor initializer: library console output at ``level`` in a worker."""
    lib = logging.getLogger(LIBRARY_LOGGER)
    _reset(lib)
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(_WORKER_FMT))
    lib.addHandler(handler)
