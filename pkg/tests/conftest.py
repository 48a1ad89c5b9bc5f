import numpy as np
import pytest

from xpdrecon.phantom import make_coil_maps, make_phantom
from xpdrecon.physics import ForwardOperator, apply_forward, make_mask

# acceptance lines collected by test_acceptance.py and echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="session")
def phantom_problem():
    """64x64 phantom, 4 coils, accel 4 with 16 ACS lines."""
    n = 64
    image = make_phantom(n)
    maps = make_coil_maps(n, 4)
    mask = make_mask(n, n, 4, 16)
    op = ForwardOperator(mask, maps)
    return image, op, apply_forward(op, image)
