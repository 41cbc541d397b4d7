import numpy as np
import pytest

from pseudomode.acceptance import AcceptanceContext
from pseudomode.mie import ResonatorSpec


@pytest.fixture(scope="session")
def spec():
    return ResonatorSpec(1.0, 3.446)


@pytest.fixture(scope="session")
def pole_cache(request):
    # Persistent across sessions: the full enumeration takes about half a minute.
    return request.config.cache.mkdir("pseudomode-poles")


@pytest.fixture(scope="session")
def ctx(spec, pole_cache):
    return AcceptanceContext(spec, cache_dir=pole_cache)


@pytest.fixture(scope="session")
def poles(ctx):
    return ctx.poles


@pytest.fixture(scope="session")
def pm10(ctx):
    return ctx.pseudomodes(10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
