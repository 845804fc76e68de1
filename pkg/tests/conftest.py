import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from farboot.function_space import Basis, make_grid  # noqa: E402
from farboot.process_models import InnovationModel, RegressionOperator, simulate_far1  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return make_grid(101)


@pytest.fixture(scope="session")
def basis(grid):
    return Basis(grid, 12)


@pytest.fixture(scope="session")
def default_model(basis):
    return RegressionOperator.exponential_linear(basis), InnovationModel.exponential(basis)


@pytest.fixture(scope="session")
def series(default_model):
    op, innov = default_model
    return simulate_far1(op, innov, 200, 100, 2024)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(RESULTS, key=lambda r: int(r[0].split()[0][1:])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
