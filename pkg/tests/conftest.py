"""Shared fixtures.

Acceptance tests record one line per criterion through the ``criterion``
fixture; the terminal summary prints them all so a run ends with an
explicit pass/fail scoreboard even when everything is green.
"""

from __future__ import annotations

import threading

import pytest

from cityforge.service import CityForge

_ACCEPTANCE: list[tuple[str, bool, str]] = []


class RecordingTransport:
    """Scriptable notification transport.

    ``script`` maps a URL to a list of status codes returned in order; the
    last entry repeats once exhausted.  Unknown URLs return 200.  Every
    call is captured as (url, payload).
    """

    def __init__(self, script: dict[str, list[int]] | None = None) -> None:
        self.script = {url: list(codes) for url, codes in (script or {}).items()}
        self.calls: list[tuple[str, dict]] = []
        self._lock = threading.Lock()

    def __call__(self, url: str, payload: dict) -> int:
        with self._lock:
            self.calls.append((url, payload))
            codes = self.script.get(url)
            if not codes:
                return 200
            return codes.pop(0) if len(codes) > 1 else codes[0]

    def calls_for(self, url: str) -> list[dict]:
        with self._lock:
            return [payload for u, payload in self.calls if u == url]


@pytest.fixture
def transport():
    return RecordingTransport()


@pytest.fixture
def service():
    # default transport: own /notify URLs dispatch in-process, so the whole
    # broker -> job -> warehouse loop runs without sockets
    svc = CityForge(notify_base="http://testserver")
    yield svc
    svc.close()


@pytest.fixture
def client(service):
    from fastapi.testclient import TestClient

    from cityforge.api import build_app

    return TestClient(build_app(service))


@pytest.fixture
def criterion():
    def record(name: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((name, bool(ok), detail))
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
