import math
from pathlib import Path

import numpy as np
import pytest

from twinmarket.banlim import sinc_kernel
from twinmarket.harness import GOLDEN_SPEC, simulate_incomplete

TESTDATA = Path(__file__).resolve().parent.parent / "testdata"


def bandlimited_truth(seed, omega0=0.8 * math.pi, lo=-256, hi=0, mean=0.0, scale=1.0):
    """A band-limited sequence sum_j b_j K(t - m_j) with seeded Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    anchors = np.arange(lo, hi + 1)
    coef = mean + scale * rng.standard_normal(anchors.size)

    def f(t):
        t = np.atleast_1d(np.asarray(t, dtype=np.int64))
        return sinc_kernel(omega0, t[:, None] - anchors[None, :]) @ coef

    return f


@pytest.fixture(scope="session")
def golden_prices():
    return simulate_incomplete(GOLDEN_SPEC)


@pytest.fixture
def testdata():
    return TESTDATA


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
