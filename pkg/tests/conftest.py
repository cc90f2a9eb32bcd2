import numpy as np
import pytest

from emgvb import PriorSpec, VariationalState
from emgvb.harness.data import make_conjugate
from emgvb.models import KnownNoiseLinearRegression


def random_spd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (q * w) @ q.T


def random_sym(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) * scale
    return 0.5 * (a + a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def conjugate():
    """Known-noise regression (n=100, d=5), prior precision 0.1, and its exact posterior."""
    ds = make_conjugate(100, 5, 1.0, seed=0)
    model = KnownNoiseLinearRegression(ds.x, ds.y, 1.0)
    prior = PriorSpec.isotropic(5, 0.1)
    return model, prior, model.exact_posterior(prior)


@pytest.fixture(scope="session")
def conjugate_state(conjugate):
    """A state near, but not at, the exact posterior."""
    model, prior, exact = conjugate
    r = np.random.default_rng(7)
    mu = exact.mu + 0.05 * r.standard_normal(5)
    prec = exact.dense_prec() * 0.8 + 5.0 * np.eye(5)
    return VariationalState.from_precision(mu, prec)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
