from __future__ import annotations

from pathlib import Path

import pytest

from asrcorrect.nbest import load_corpus

DATA = Path(__file__).parent / "data"
CORPUS20 = DATA / "corpus20.jsonl"
REPLAY = DATA / "replay_cache.jsonl"
GOLDEN = DATA / "golden"


@pytest.fixture
def corpus20():
    return load_corpus(CORPUS20, max_n=10)


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite golden files instead of comparing")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


# -- acceptance criteria reporting -------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line in the summary.

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.skipped:
        return
    if report.when == "call" or report.failed:
        num, title = mark.args
        ok = report.passed and _criteria.get(num, (title, True))[1]
        _criteria[num] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:>2}. {title}")
