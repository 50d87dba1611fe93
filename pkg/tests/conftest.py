import numpy as np
import pytest

from projsplit.lasso import LassoProblem


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_lasso(rng, m, d, lam=None, normalize=True):
    Q = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    if normalize:
        Q /= np.linalg.norm(Q, axis=0)
    if lam is None:
        lam = 0.3 * float(np.max(np.abs(Q.T @ b)))
    return LassoProblem(Q, b, lam)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
