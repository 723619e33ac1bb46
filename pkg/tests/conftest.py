import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests/gen.py import

from slopeagent.model import PartialProblem, build_problem

SUITE_BUDGET_S = 120.0


def pytest_configure(config):
    config._suite_started = time.perf_counter()
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one '[acceptance] <criterion>: PASS' line for the run summary.

    Lines are only recorded by tests that passed their own assertions, so a
    recorded line is backed by the checks above it.
    """
    def _record(criterion: str) -> None:
        request.config._acceptance_lines.append(f"[acceptance] {criterion}: PASS")
    return _record


def pytest_sessionfinish(session, exitstatus):
    config = session.config
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    elapsed = time.perf_counter() - config._suite_started
    if elapsed < SUITE_BUDGET_S:
        lines.append(f"[acceptance] suite runtime under {SUITE_BUDGET_S:.0f} s: "
                     f"PASS ({elapsed:.1f} s)")
    else:
        lines.append(f"[acceptance] suite runtime under {SUITE_BUDGET_S:.0f} s: "
                     f"FAIL ({elapsed:.1f} s)")
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for line in getattr(config, "_acceptance_lines", []):
        terminalreporter.write_line(line)


@pytest.fixture
def simple_partial() -> PartialProblem:
    fields = {
        "geometry.height": 10.0,
        "geometry.slope_angle": 45.0,
        "layers[0].name": "fill",
        "layers[0].unit_weight": 18.0,
        "layers[0].cohesion": 5.0,
        "layers[0].friction_angle": 20.0,
    }
    return PartialProblem(dict(fields), {k: "USER" for k in fields})


@pytest.fixture
def simple_problem(simple_partial):
    return build_problem(simple_partial)
