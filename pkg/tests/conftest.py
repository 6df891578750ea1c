import numpy as np
import pytest

from asleval.metrics import evaluate_query

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixture_q1():
    # qrels {d1:1, d4:1, d9:1, d2:0}, run [d1..d5]
    return evaluate_query({"d1", "d4", "d9"}, ["d1", "d2", "d3", "d4", "d5"], "q1")


@pytest.fixture
def fixture_q2():
    # single relevant doc at rank 2
    return evaluate_query({"e2"}, ["e1", "e2", "e3"], "q2")


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion's outcome for the summary lines."""
    name = request.node.get_closest_marker("criterion").args[0]
    yield
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    detail = "" if passed or rep is None else str(rep.longrepr).splitlines()[-1][:120]
    ACCEPTANCE_RESULTS.append((name, passed, detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion id")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
