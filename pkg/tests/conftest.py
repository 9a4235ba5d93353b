import pytest

from regmc.schedules import parse_schedule

# Two writes by t0 and t1 overlap; after both, t2 reads 1 and then 2.
SPLIT_READS = """schedule n=3 domain=3 init=0
sw 0 1
sw 1 2
fw 0
fw 1
sr 2
fr 2 1
sr 2
fr 2 2
"""

# w1 (t0 writes 1) overlaps w2 (t1 writes 2); r1 after w1 returns 2, r2 after w2 returns 1.
CROSSED_READS = """schedule n=3 domain=3 init=0
sw 0 1
sw 1 2
fw 0
sr 2
fr 2 2
fw 1
sr 2
fr 2 1
"""


@pytest.fixture
def split_reads():
    return parse_schedule(SPLIT_READS)


@pytest.fixture
def crossed_reads():
    return parse_schedule(CROSSED_READS)


_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _RESULTS.get(number, (title, True))
        _RESULTS[number] = (title, prev[1] and report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
