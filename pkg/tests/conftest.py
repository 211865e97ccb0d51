import math

import numpy as np
import pytest

from embedded_eigen.generator import GeneratorParams, generate_pair
from embedded_eigen.model import make_energy_point

ACCEPTANCE_LINES: list[str] = []

BYSTANDER_E = 2.0 * math.cos(0.29 * math.pi)
PAIR_N0 = 2000
PAIR_HORIZON = 2_000_000
DENSE = (2000, 400_000)

GLUED_ENERGIES = [1.0, -1.0, 0.5]
GLUED_ANGLES = [math.pi / 4, math.pi / 3, math.pi / 6]
GLUED_HORIZON = 10_000_000


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pair_run():
    """E = 1 pair piece with bystander 2cos(0.29 pi), shift b = n0 - K2."""
    E = make_energy_point(1.0)
    A = [make_energy_point(BYSTANDER_E)]
    params = GeneratorParams.for_target(E, A, n0=PAIR_N0, horizon=PAIR_HORIZON)
    return generate_pair(E, A, PAIR_N0, 0.1, 0.3, params, dense_window=DENSE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
