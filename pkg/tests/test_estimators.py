"""scikit-learn style wrappers around the smoother and the REML fit."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tcskin import (HeritabilityREML, TreeletCovarianceSmoother, build_treelet,
                    fit_variance_components, smooth_covariance)
from tcskin.reml import PhenotypeVector

from conftest import as_matrix, random_symmetric


def test_get_set_params_roundtrip():
    est = TreeletCovarianceSmoother(threshold=0.3, levels=4)
    params = est.get_params()
    assert params["threshold"] == 0.3
    assert params["levels"] == 4
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(threshold=0.5)
    assert est.threshold == 0.5


def test_smoother_matches_library_call(rng):
    values = random_symmetric(rng, 8)
    est = TreeletCovarianceSmoother(threshold=0.2).fit(values)
    out = est.transform(values)
    matrix = as_matrix(values, ids=[str(i) for i in range(8)])
    expected = smooth_covariance(matrix, build_treelet(matrix), 0.2)
    assert np.array_equal(out, expected.values.values)


def test_smoother_zero_threshold_is_identity(rng):
    values = random_symmetric(rng, 6)
    out = TreeletCovarianceSmoother(threshold=0.0).fit(values).transform(values)
    assert np.abs(out - values).max() < 1e-10


def test_smoother_requires_fit(rng):
    with pytest.raises(NotFittedError):
        TreeletCovarianceSmoother().transform(np.eye(3))


def test_smoother_rejects_shape_mismatch(rng):
    est = TreeletCovarianceSmoother().fit(random_symmetric(rng, 5))
    with pytest.raises(ValueError):
        est.transform(random_symmetric(rng, 6))
    with pytest.raises(ValueError, match="square"):
        est.fit(rng.standard_normal((4, 5)))


def test_smoother_psd_repair(rng):
    values = random_symmetric(rng, 10)
    out = TreeletCovarianceSmoother(threshold=0.5, repair_psd=True) \
        .fit(values).transform(values)
    assert np.linalg.eigvalsh(out).min() >= -1e-10


def _sib_values(n_fam, fam):
    n = n_fam * fam
    a = np.eye(n)
    for f in range(n_fam):
        s = slice(f * fam, (f + 1) * fam)
        block = np.full((fam, fam), 0.5)
        np.fill_diagonal(block, 1.0)
        a[s, s] = block
    return a


def test_heritability_estimator_matches_library_fit():
    a = _sib_values(20, 5)
    rng = np.random.default_rng(3)
    chol = np.linalg.cholesky(a)
    y = 1.0 + chol @ rng.standard_normal(100) * math.sqrt(0.5) \
        + rng.standard_normal(100) * math.sqrt(0.5)
    est = HeritabilityREML().fit(a, y)
    ids = [str(i) for i in range(100)]
    vc = fit_variance_components(
        PhenotypeVector(y=y, sample_ids=ids), as_matrix(a, ids=ids))
    assert est.h2_ == vc.h2
    assert est.sigma_g2_ == vc.sigma_g2
    assert est.sigma_e2_ == vc.sigma_e2
    assert est.mu_ == vc.mu_hat
    assert est.loglik_ == vc.reml_loglik
    assert est.converged_ == vc.converged


def test_heritability_estimator_validates_lengths():
    a = _sib_values(4, 3)
    with pytest.raises(ValueError, match="length"):
        HeritabilityREML().fit(a, np.zeros(5))
