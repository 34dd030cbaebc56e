import numpy as np
import pytest

from oband_dbp.grid import SampledField, TimeGrid, complex_gaussian, rng_stream


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(n=1024, fs=100e9, power=1e-3, seed=0):
    grid = TimeGrid(n, fs)
    s = complex_gaussian(rng_stream(seed, "test"), (2, n), power / 2)
    return SampledField(grid, s)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """List shared by the acceptance tests; its lines are echoed in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
