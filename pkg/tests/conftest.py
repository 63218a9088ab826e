"""Shared helpers for the test suite."""

import numpy as np
import pytest

from tcskin import RelationshipMatrix


def random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) * scale
    return (m + m.T) / 2.0


def random_psd(rng, n, extra=2):
    z = rng.standard_normal((n, n + extra))
    return z @ z.T / (n + extra)


def as_matrix(values, kind="raw_estimate", ids=None):
    n = values.shape[0]
    if ids is None:
        ids = [f"s{i}" for i in range(n)]
    return RelationshipMatrix(values=values, sample_ids=ids, kind=kind)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
