import numpy as np
import pytest

from proxtd.harness import prepare_problem

ACCEPTANCE_LINES = []


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def problems():
    return {name: prepare_problem(name) for name in ("baird", "chain50", "battery")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
