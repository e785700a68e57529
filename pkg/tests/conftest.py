import math

import numpy as np
import pytest
from hypothesis import settings

from rbo.spectral import Field, GridSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_grid():
    return GridSpec(1024, 64 * math.pi)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(256, 32 * math.pi)


@pytest.fixture(scope="session")
def unit_grid():
    return GridSpec(64, 2 * math.pi)


def gaussian(grid, amplitude=1.0, width=1.0, center=0.0):
    return Field.from_values(grid, amplitude * np.exp(-(((grid.x - center) / width) ** 2)))


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
