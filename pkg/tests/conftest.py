import numpy as np
import pytest

from covadj.restore import ObservedSample


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_observed(rng, n=200, q=1, psi=None, phi=None):
    """Small expsat-like sample with optional distortion functions of u."""
    u = rng.uniform(0.0, 2.0, n)
    x = rng.uniform(1.0, 10.0, (n, q))
    y = 4.0 * (1.0 - np.exp(-0.2 * x[:, 0])) + 0.3 * rng.standard_normal(n)
    ps = np.ones(n) if psi is None else psi(u)
    ph = np.ones((n, q)) if phi is None else np.column_stack([phi(u)] * q)
    return ObservedSample(u, x * ph, y * ps), (u, x, y)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
