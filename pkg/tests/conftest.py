from __future__ import annotations

import pytest

from cbs import default_kb_bytes
from cbs.engine import Engine
from cbs.kb_store import parse_kb
from cbs.text_pipeline import StopwordList

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def fixture_bytes() -> bytes:
    return default_kb_bytes()


@pytest.fixture(scope="session")
def fixture_kb(fixture_bytes):
    return parse_kb(fixture_bytes)


@pytest.fixture(scope="session")
def stops() -> StopwordList:
    return StopwordList.default()


@pytest.fixture
def engine(fixture_kb, stops) -> Engine:
    return Engine(fixture_kb, stops)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        ACCEPTANCE_RESULTS.append((marker.args[0], "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{status}] {name}")
