from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from flatcert.catalog import ENTRIES, load_entry
from flatcert.jets import ParameterFunction
from flatcert.specfile import load_spec
from flatcert.system import ImplicitSystem

# fixed example sequence so runs are reproducible
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def catalog():
    return {name: load_entry(name) for name in ENTRIES}


@pytest.fixture(scope="session")
def defective_spec():
    return load_spec(FIXTURES / "defective_phi.flat")


@pytest.fixture
def double_integrator():
    return ImplicitSystem.from_expressions(2, 1, ["p1 - x2"], ["x2", "u1"], "double_integrator")


@pytest.fixture
def di_phi():
    return ParameterFunction.from_expressions(["y0_1", "y1_1"], m=1, r=1)


@pytest.fixture
def pendulum():
    return ImplicitSystem.from_expressions(2, 1, ["p1 - x2"], ["x2", "-sin(x1) + u1"], "pendulum")


@pytest.fixture
def unicycle():
    return ImplicitSystem.from_expressions(
        3, 2, ["p1*sin(x3) - p2*cos(x3)"], ["u1*cos(x3)", "u1*sin(x3)", "u2"], "unicycle"
    )


@pytest.fixture
def unicycle_phi():
    return ParameterFunction.from_expressions(["y0_1", "y0_2", "atan2(y1_2, y1_1)"], m=2, r=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, line = RESULTS[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {line}")
