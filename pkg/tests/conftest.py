import numpy as np
import pytest

from subsetbench.model import Dataset


def standardized_matrix(n, p, rng):
    """Random centered matrix with columns scaled to mean square 1."""
    m = rng.standard_normal((n, p))
    m -= m.mean(axis=0)
    m /= np.sqrt((m * m).sum(axis=0) / n)
    return m


def orthogonal_design(n, p, rng):
    """Centered matrix with exactly orthogonal columns of squared norm n."""
    m = rng.standard_normal((n, p + 1))
    m -= m.mean(axis=0)
    q, _ = np.linalg.qr(m)
    return q[:, :p] * np.sqrt(n)


def make_dataset(x, beta, sigma, rng, meta=None):
    y = x @ beta + sigma * rng.standard_normal(x.shape[0])
    support = frozenset(int(j) + 1 for j in np.flatnonzero(beta))
    return Dataset(x=x, y=y, true_support=support, sigma2=sigma**2, meta=meta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
