import math

import pytest

from fibosc.algebra import DeformationParams

PHI = (1.0 + math.sqrt(5.0)) / 2.0
LN2 = math.log(2.0)
LN3 = math.log(3.0)

_criteria = []
_setup_time = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "setup":
        # fixture work counts towards the criterion's runtime
        _setup_time[item.nodeid] = rep.duration
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        num, title = mark.args
        known = getattr(rep, "wasxfail", None)
        duration = rep.duration + (_setup_time.pop(item.nodeid, 0.0) if rep.when == "call" else 0.0)
        _criteria.append((num, title, rep.outcome, duration, known))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, title, outcome, duration, known in sorted(_criteria):
        verdict = "PASS" if outcome == "passed" and known is None else "FAIL"
        note = f" [known failure: {known}]" if known else ""
        terminalreporter.write_line(
            f"[{verdict}] criterion {num:2d}: {title} ({duration:.2f} s){note}")


@pytest.fixture
def fib():
    return DeformationParams(PHI, 1.0 - PHI, 1.0)


@pytest.fixture
def p21():
    return DeformationParams(2.0, 1.0, LN2)


@pytest.fixture
def p15():
    return DeformationParams(1.5, 0.5, LN3)
