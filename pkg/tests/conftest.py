import pytest

from meanfield_offload.reward import NetworkConfig

_ACCEPTANCE_LINES = []


@pytest.fixture
def desk_cfg():
    """Small config whose deadline leaves Q graded over (0, 1)."""
    return NetworkConfig(m=100, n=2, d_max=3.0)


@pytest.fixture
def sym_cfg():
    """Symmetric-bounds task-size law with a tidy gamma_max."""
    return NetworkConfig(m=10, n=2, gamma_max=100.0, d_max=1.0)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
