import numpy as np
import pytest

from galerkin_mhd.fields import Grid
from galerkin_mhd.params import FluidParams, RegularizationParams


@pytest.fixture
def grid2():
    return Grid.box(32, 32, 1, mode="2.5d")


@pytest.fixture
def grid3():
    return Grid.box(16, 16, 16, mode="3d")


@pytest.fixture
def desk_grid():
    return Grid.box(64, 64, 1, mode="2.5d")


@pytest.fixture
def fluid():
    return FluidParams(a=1.0, gamma=5.0 / 3.0, mu=0.1, lam=0.0, nu=0.1)


@pytest.fixture
def no_reg():
    return RegularizationParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line per criterion, then assert it."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        store[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
