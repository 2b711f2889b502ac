import os
import socket
import sys
import time

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_sessionstart(session):
    acceptance_log.SESSION_START = time.monotonic()


def pytest_collection_modifyitems(session, config, items):
    # acceptance runs last so its offline/timing criterion covers the whole suite
    items.sort(key=lambda item: item.nodeid.split("::")[0].endswith("test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines():
            terminalreporter.write_line(line)


_real_connect = socket.socket.connect


def _guarded_connect(self, address):
    if self.family in (socket.AF_INET, socket.AF_INET6):
        acceptance_log.NETWORK_ATTEMPTS.append(address)
        raise OSError(f"network access blocked in tests: {address!r}")
    return _real_connect(self, address)


@pytest.fixture(autouse=True, scope="session")
def _offline():
    socket.socket.connect = _guarded_connect
    yield
    socket.socket.connect = _real_connect


@pytest.fixture
def table1_bundle(tmp_path):
    from helpers import write_table1_bundle

    return write_table1_bundle(str(tmp_path / "table1"))


@pytest.fixture(autouse=True)
def _no_api_keys(monkeypatch):
    for name in ("SCANNER_API_KEY", "VISION_API_KEY", "OCR_API_KEY", "MADROID_CONFIG"):
        monkeypatch.delenv(name, raising=False)
