import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_spd(rng, d, cond=20.0):
    """SPD matrix with eigenvalues spread over [1, cond] and a random basis."""
    q = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    w = np.exp(rng.uniform(0.0, np.log(cond), size=d))
    m = (q * w) @ q.T
    return 0.5 * (m + m.T)


def random_orthogonal(rng, d):
    return ortho_group.rvs(d, random_state=rng) if d > 1 else np.array([[-1.0]])


@st.composite
def spd_matrices(draw, min_dim=1, max_dim=5):
    d = draw(st.integers(min_dim, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_spd(np.random.default_rng(seed), d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def within_sigma(value, target, se, k=3.0):
    return abs(value - target) <= k * se


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)
