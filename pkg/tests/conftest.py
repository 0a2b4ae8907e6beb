import itertools

import pytest
from hypothesis import HealthCheck, settings

from czhardy.measure import WeightedMeasure
from czhardy.tree import TreeTruncation

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def words(q, depth):
    """All words of length <= depth over the digits 0..q-1, shortest first."""
    out = [""]
    for k in range(1, depth + 1):
        out += ["".join(map(str, w)) for w in itertools.product(range(q), repeat=k)]
    return out


def bfs_distances(q, depth, source):
    """Graph distances from ``source`` computed by breadth-first search on words."""
    def nbrs(w):
        out = [w[:-1]] if w else []
        if len(w) < depth:
            out += [w + str(c) for c in range(q)]
        return out

    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for w in frontier:
            for v in nbrs(w):
                if v not in dist:
                    dist[v] = dist[w] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


@pytest.fixture
def small():
    t = TreeTruncation(2, 4)
    return t, WeightedMeasure(t)


@pytest.fixture
def tree36():
    t = TreeTruncation(3, 6)
    return t, WeightedMeasure(t)


# one summary line per acceptance criterion -------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for mark in getattr(report, "criterion_marks", ()):
        prev = _criteria.get(mark, "PASS")
        _criteria[mark] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.criterion_marks = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n}: {_criteria[n]}")
