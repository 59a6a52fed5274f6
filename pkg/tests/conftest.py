from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sessionweave.dsl import parse_file

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus_files(kind: str) -> list[Path]:
    return sorted((CORPUS / kind).glob("*.mps"))


@pytest.fixture
def load():
    def _load(rel: str):
        return parse_file(CORPUS / rel)

    return _load


# acceptance criteria: one PASS/FAIL line each in the terminal summary

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and report.passed:
        return
    n, title = marker.args
    ok = report.passed
    prev = _criteria.get(n)
    _criteria[n] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n}. {title}")
