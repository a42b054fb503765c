import os

from hypothesis import HealthCheck, settings
import pytest

from qtorsion.geometry import diameter
from qtorsion.torsion import add_solve_observer

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (grad_max, diameter) of every torsion solve in the session
SOLVES = []
# acceptance lines, printed in the terminal summary
ACCEPTANCE = {}


def _monitor(sol):
    SOLVES.append((sol.grad_max, diameter(sol.mesh.polygon)))


add_solve_observer(_monitor)


def pytest_collection_modifyitems(config, items):
    # the gradient audit must see every other solve first
    last = [it for it in items if it.get_closest_marker("audit_last")]
    rest = [it for it in items if not it.get_closest_marker("audit_last")]
    items[:] = rest + last


def pytest_configure(config):
    config.addinivalue_line("markers", "audit_last: run after every other test")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def report_criterion():
    def record(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok
    return record
