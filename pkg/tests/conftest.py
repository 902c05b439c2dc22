import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


def random_sym(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) * scale
    return (a + a.T) / 2


def unit_sample(rng, n, d):
    """Random matrices with eigenvalues in [0, 1]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, d, d)))
    u = rng.uniform(size=(n, d))
    return np.einsum("nik,nk,njk->nij", q, u, q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
