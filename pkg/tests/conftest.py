import numpy as np
import pytest
from hypothesis import settings

from relaysim.channel import NetworkDims, sample_realization, trial_seed

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_real():
    def _make(K=4, M=2, N=2, seed=0, index=0):
        return sample_realization(NetworkDims(K=K, M=M, N=N), trial_seed(seed, index))

    return _make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
