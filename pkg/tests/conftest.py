import numpy as np
import pytest

from mecrelay import SystemParams
from mecrelay.montecarlo import random_feasible_instance

# pass/fail lines collected by the acceptance suite, printed at the end of the run
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def feasible(seed, M=1, **kw):
    """A random feasible instance of the reference scenario, reproducible from ``seed``."""
    return random_feasible_instance(np.random.default_rng(seed), M=M, **kw)


@pytest.fixture
def inst1():
    return feasible(11)


@pytest.fixture
def inst2():
    return feasible(12, M=2)


@pytest.fixture
def reference_system():
    return SystemParams()
