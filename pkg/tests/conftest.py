from __future__ import annotations

import re
import sys
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"
SCENARIOS = FIXTURES / "scenarios"
sys.path.insert(0, str(Path(__file__).parent))


def scenario_paths():
    return sorted(SCENARIOS.glob("*.json"))


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Load the compiled kernels once so timing tests do not pay for it."""
    from weavestrf._kernels import obstacle_field_points
    from weavestrf.sampler import _segment_free
    from weavestrf.scene import Obstacle, PredictedTrajectory, VehicleState
    from weavestrf.geometry import FrenetPoint
    from weavestrf.params import FieldParams

    p = FrenetPoint(0.0, 1.0)
    ob = Obstacle(VehicleState(p, v=10.0), PredictedTrajectory.constant_velocity(p, 10.0), "warm")
    obstacle_field_points(np.array([5.0]), np.array([1.0]), 0.0, ob, FieldParams())
    _segment_free(np.zeros((2, 2), dtype=bool), 0.0, 0.0, 0.5, 0.1, 0.1, 0.9, 0.9)


# one summary line per acceptance criterion, in the terminal report
_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        key = int(m.group(1))
        prev = _CRITERIA.get(key, (m.group(2), "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        if report.outcome == "skipped":
            status = "SKIP"
        _CRITERIA[key] = (m.group(2), status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        name, status = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:2d} {name.replace('_', ' '):40s} {status}")
