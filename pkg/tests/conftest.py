import sys
from collections import OrderedDict
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# criterion id -> (title, list of outcomes)
_CRITERIA: "OrderedDict[int, tuple[str, list[str]]]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            _CRITERIA.setdefault(n, (title, []))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n = m.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[n][1].append("skipped" if rep.skipped else rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, (title, outcomes) in sorted(_CRITERIA.items()):
        if not outcomes:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        elif any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        else:
            verdict = "SKIP"
        tr.write_line(f"[{verdict:7}] criterion {n:2}: {title} ({len(outcomes)} checks)")


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def py():
    return sys.executable
