from __future__ import annotations

import logging
from unittest.mock import patch

import pytest

from src.core.log_setup import (
    CLI_LOGGER,
    LIBRARY_LOGGER,
    TRACE,
    console_level,
    effective_console_level,
    setup_logging,
    trace_file_path,
    worker_logging,
)


def _console(logger):
    return [
        h for h in logger.handlers
        if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
    ]


def _files(logger):
    return [h for h in logger.handlers if isinstance(h, logging.FileHandler)]


def _drop_handlers():
    for name in (CLI_LOGGER, LIBRARY_LOGGER):
        lg = logging.getLogger(name)
        for h in list(lg.handlers):
            lg.removeHandler(h)
            h.close()


@pytest.fixture(autouse=True)
def _clean_handlers():
    _drop_handlers()
    yield
    _drop_handlers()


class TestTraceLevel:
    def test_trace_level_value(self):
        assert TRACE == 5

    def test_trace_level_name(self):
        assert logging.getLevelName(TRACE) == "TRACE"


class TestConsoleLevel:
    @pytest.mark.parametrize("flags, level", [
        ({}, logging.INFO),
        ({"debug": True}, logging.DEBUG),
        ({"trace": True}, logging.DEBUG),
        ({"trace": True, "verbose": True}, TRACE),
        ({"verbose": True}, logging.INFO),
    ])
    def test_flags(self, flags, level):
        kwargs = {"debug": False, "trace": False, "verbose": False, **flags}
        assert console_level(**kwargs) == level


class TestTraceFilePath:
    def test_command_in_name(self, tmp_path):
        with patch("src.core.log_setup.TRACE_DIR", str(tmp_path)):
            path = trace_file_path("bench")
        assert path.parent == tmp_path
        assert path.name.startswith("trace-bench-")
        assert path.suffix == ".log"

    def test_without_command(self):
        assert trace_file_path().name.startswith("trace-2")


class TestSetupLogging:
    def test_returns_cli_logger(self):
        assert setup_logging(debug=False, trace=False, verbose=False).name == CLI_LOGGER

    def test_shared_console_handler(self):
        cli = setup_logging(debug=True, trace=False, verbose=False)
        assert _console(cli) == _console(logging.getLogger(LIBRARY_LOGGER))
        assert _console(cli)[0].level == logging.DEBUG

    def test_trace_writes_one_file_for_both_loggers(self, tmp_path):
        with patch("src.core.log_setup.TRACE_DIR", str(tmp_path)):
            cli = setup_logging(debug=False, trace=True, verbose=False, command="fit-dantzig")
        files = _files(logging.getLogger(LIBRARY_LOGGER))
        assert len(files) == 1
        assert files[0] in _files(cli)
        assert files[0].level == TRACE
        logging.getLogger("src.selection.lpsolver").log(TRACE, "pivot 1")
        files[0].flush()
        (log_file,) = tmp_path.iterdir()
        assert log_file.name.startswith("trace-fit-dantzig-")
        assert "pivot 1" in log_file.read_text()

    def test_trace_console_stays_debug(self, tmp_path):
        with patch("src.core.log_setup.TRACE_DIR", str(tmp_path)):
            cli = setup_logging(debug=False, trace=True, verbose=False)
        assert _console(cli)[0].level == logging.DEBUG

    def test_no_file_without_trace(self):
        setup_logging(debug=True, trace=False, verbose=False)
        assert _files(logging.getLogger(LIBRARY_LOGGER)) == []

    def test_repeated_setup_replaces_and_closes(self, tmp_path):
        with patch("src.core.log_setup.TRACE_DIR", str(tmp_path)):
            setup_logging(debug=False, trace=True, verbose=False)
        old = _files(logging.getLogger(LIBRARY_LOGGER))[0]
        cli = setup_logging(debug=False, trace=False, verbose=False)
        assert len(_console(cli)) == 1
        assert _files(logging.getLogger(LIBRARY_LOGGER)) == []
        assert old.stream is None


class TestWorkerLogging:
    def test_effective_level_follows_setup(self):
        setup_logging(debug=True, trace=False, verbose=False)
        assert effective_console_level() == logging.DEBUG

    def test_effective_level_without_setup(self):
        assert effective_console_level() == logging.WARNING

    def test_worker_drops_trace_file(self, tmp_path):
        with patch("src.core.log_setup.TRACE_DIR", str(tmp_path)):
            setup_logging(debug=False, trace=True, verbose=False)
        worker_logging(logging.INFO)
        lib = logging.getLogger(LIBRARY_LOGGER)
        assert _files(lib) == []
        (console,) = _console(lib)
        assert console.level == logging.INFO
        assert "processName" in console.formatter._fmt
