import numpy as np
import pytest

from fairlens.data import LandmarkFace
from fairlens.synthetic import template_points

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _criteria.get(number, (text, True))
        _criteria[number] = (text, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def template_face():
    return LandmarkFace("template", template_points(), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
