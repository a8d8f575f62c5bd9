import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lattice_efimov import TorusGrid, calibrate_resonance, zero_range  # noqa: E402

# frozen reference values from the oracles in oracles.py
MU_STAR_ZERO_RANGE = 3.9567760226940054
LAMBDA0 = 1.0062378251027815


@pytest.fixture(scope="session")
def grid8():
    return TorusGrid(8)


@pytest.fixture(scope="session")
def zr_cal(grid8):
    return calibrate_resonance(zero_range(1.0), grid8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
