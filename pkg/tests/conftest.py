import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs longer than a few seconds")
    config._acceptance_lines = []


@pytest.fixture
def acceptance_log(request):
    """Collects PASS/FAIL lines that are echoed in the terminal summary."""
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def random_configuration(rng, n, spread=1.0, min_sep=0.05):
    """Intensities in +-[0.2, 1.5] and positions with pairwise gaps above ``min_sep``."""
    while True:
        xi = rng.uniform(0.2, 1.5, n) * rng.choice([-1.0, 1.0], n)
        z = spread * (rng.normal(size=n) + 1j * rng.normal(size=n))
        d = np.abs(z[:, None] - z[None, :]) + np.eye(n) * 1e9
        if d.min() > min_sep:
            return xi, z
