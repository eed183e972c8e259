import math

import numpy as np
import pytest

from rollkit.zoo import make_manifold

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    n, title = crit
    prev = _CRITERIA.get(n, (title, True))
    _CRITERIA[n] = (title, prev[1] and report.outcome == "passed")


@pytest.fixture(autouse=True)
def _criterion_tag(request, record_property):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        record_property("criterion", (m.args[0], m.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def sphere():
    return make_manifold({"kind": "space_form", "n": 2, "k": 1.0})


@pytest.fixture(scope="session")
def sphere2():
    return make_manifold({"kind": "space_form", "n": 2, "k": 2.0})


@pytest.fixture(scope="session")
def plane():
    return make_manifold({"kind": "euclidean", "n": 2})


def rot2(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def unit_sphere_embed(x):
    """Polar chart (polar distance r, longitude t) of the unit sphere into R^3."""
    r, t = x
    return np.array([math.sin(r) * math.cos(t), math.sin(r) * math.sin(t), math.cos(r)])
