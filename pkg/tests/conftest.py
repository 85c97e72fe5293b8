import numpy as np
import pytest

from lpl.potentials import GaussianMixture


def mixture3():
    """A fixed three-component 2D mixture with correlated covariances."""
    return GaussianMixture(
        [0.5, 0.3, 0.2],
        [[0.0, 0.0], [2.0, -1.0], [-1.5, 1.0]],
        [[[1.0, 0.3], [0.3, 0.8]], [[0.5, -0.1], [-0.1, 0.4]], [[0.7, 0.0], [0.0, 1.2]]],
    )


@pytest.fixture
def gmm3():
    return mixture3()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
