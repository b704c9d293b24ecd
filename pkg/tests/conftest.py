import pytest

from gqgames import geometry


@pytest.fixture(scope="session")
def eloily():
    return geometry.build_eloily()


@pytest.fixture(scope="session")
def doily():
    return geometry.build_doily()


@pytest.fixture(scope="session")
def grid():
    return geometry.build_canonical_grids()[0]


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
