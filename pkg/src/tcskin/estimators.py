"""scikit-learn style estimators wrapping the treelet smoother and the REML fit.

These make the core algorithms compose with sklearn pipelines and parameter
search utilities (``get_params`` / ``set_params`` via ``BaseEstimator``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .grm import RelationshipMatrix
from .reml import PhenotypeVector, fit_variance_components
from .smoothing import psd_repair, smooth_covariance
from .treelet import build_treelet


def _as_relationship(X, kind="raw_estimate") -> RelationshipMatrix:
    X = check_array(X, ensure_min_samples=2)
    if X.shape[0] != X.shape[1]:
        raise ValueError("expected a square symmetric matrix")
    ids = [str(i) for i in range(X.shape[0])]
    return RelationshipMatrix(values=X, sample_ids=ids, kind=kind)


class TreeletCovarianceSmoother(BaseEstimator, TransformerMixin):
    """Smooth symmetric matrices by hard thresholding in a treelet basis.

    ``fit`` learns the basis from a (relationship/covariance) matrix;
    ``transform`` thresholds a matrix of the same dimension in that basis and
    rotates back.

    Parameters
    ----------
    threshold : float
        Smoothing parameter; entries of the transformed matrix below it in
        absolute value are zeroed.
    levels : int or None
        Tree depth; default full depth N-1.
    similarity : str
        Pair-selection similarity, "correlation" or "covariance".
    preserve_diagonal : bool
        Exempt the diagonal of the transformed matrix from thresholding.
    repair_psd : bool
        Clip negative eigenvalues of the smoothed output.
    """

    def __init__(self, threshold=0.0, levels=None, similarity="correlation",
                 preserve_diagonal=False, repair_psd=False):
        self.threshold = threshold
        self.levels = levels
        self.similarity = similarity
        self.preserve_diagonal = preserve_diagonal
        self.repair_psd = repair_psd

    def fit(self, X, y=None):
        matrix = _as_relationship(X)
        self.n_features_in_ = matrix.n
        self.decomposition_ = build_treelet(matrix, levels=self.levels,
                                            similarity=self.similarity)
        self.basis_ = self.decomposition_.basis
        return self

    def transform(self, X):
        check_is_fitted(self, "decomposition_")
        matrix = _as_relationship(X, kind="raw_estimate")
        if matrix.n != self.n_features_in_:
            raise ValueError(
                f"matrix has {matrix.n} samples; smoother was fit on {self.n_features_in_}"
            )
        sm = smooth_covariance(matrix, self.decomposition_, self.threshold,
                               preserve_diagonal=self.preserve_diagonal)
        if self.repair_psd:
            sm = psd_repair(sm)
        return sm.values.values


class HeritabilityREML(BaseEstimator):
    """Narrow-sense heritability by REML under Var[y] = A*sg2 + I*se2.

    ``fit(X, y)`` takes the relationship matrix X and phenotype vector y;
    fitted attributes are ``h2_``, ``sigma_g2_``, ``sigma_e2_``, ``mu_``,
    ``loglik_`` and ``converged_``.
    """

    def __init__(self, bracket_tol=1e-5):
        self.bracket_tol = bracket_tol

    def fit(self, X, y):
        matrix = _as_relationship(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.size != matrix.n:
            raise ValueError("phenotype length does not match matrix dimension")
        pheno = PhenotypeVector(y=y, sample_ids=list(matrix.sample_ids))
        vc = fit_variance_components(pheno, matrix, bracket_tol=self.bracket_tol)
        self.n_features_in_ = matrix.n
        self.h2_ = vc.h2
        self.sigma_g2_ = vc.sigma_g2
        self.sigma_e2_ = vc.sigma_e2
        self.mu_ = vc.mu_hat
        self.loglik_ = vc.reml_loglik
        self.converged_ = vc.converged
        return self


__all__ = ["TreeletCovarianceSmoother", "HeritabilityREML"]
