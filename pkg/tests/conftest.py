import numpy as np
import pytest

from wfdelay.kinematics import ChargeParams
from wfdelay.schild import schild_solve, schild_strips
from wfdelay.trajectory import WorldLine, segment_from_function


@pytest.fixture(scope="session")
def schild():
    return schild_solve(1.0, 1.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def strips(schild):
    return schild_strips(schild)


def straight_line(q0, v, a=-50.0, b=50.0, label=1, mass=1.0, charge=1.0):
    q0, v = np.asarray(q0, float), np.asarray(v, float)
    seg = segment_from_function(lambda s: q0 + v * s, a, b, degree=2)
    return WorldLine(ChargeParams(mass, charge, label), (seg,))


ACCEPTANCE = []


def record(criterion, passed, detail):
    """Log one acceptance line; the lines are repeated in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
