"""Treelet covariance smoothing: hard thresholding in the treelet basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grm import RelationshipMatrix
from .treelet import TreeletDecomposition, identity_decomposition, transform_covariance


@dataclass
class SmoothedMatrix:
    values: RelationshipMatrix
    lam: float
    zeroed_count: int
    psd_repaired: bool = False


def threshold_entries(m: np.ndarray, lam: float,
                      preserve_diagonal: bool = False) -> np.ndarray:
    """Element-wise hard threshold: entries with |a| < lam become 0.

    The diagonal is thresholded too (the literal rule); ``preserve_diagonal``
    exempts it.
    """
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    m = np.asarray(m, dtype=float)
    out = np.where(np.abs(m) >= lam, m, 0.0)
    if preserve_diagonal:
        np.fill_diagonal(out, np.diag(m))
    return out


def _zeroed_in_triangle(before: np.ndarray, after: np.ndarray) -> int:
    tri = np.tril_indices(before.shape[0])
    return int(np.sum((before[tri] != 0.0) & (after[tri] == 0.0)))


def smooth_covariance(a_hat: RelationshipMatrix, decomp: TreeletDecomposition,
                      lam: float, preserve_diagonal: bool = False) -> SmoothedMatrix:
    """Smooth a relationship matrix: B f_lam[B' A B] B'.

    The decomposition must match the matrix (same samples, in order); the
    result is re-symmetrized to absorb floating-point asymmetry.
    """
    if decomp.sample_ids is not None and list(decomp.sample_ids) != list(a_hat.sample_ids):
        raise ValueError("decomposition and matrix refer to different samples")
    if decomp.basis.shape[0] != a_hat.n:
        raise ValueError("decomposition and matrix dimensions differ")
    t = transform_covariance(decomp, a_hat)
    ft = threshold_entries(t, lam, preserve_diagonal=preserve_diagonal)
    smoothed = decomp.basis @ ft @ decomp.basis.T
    smoothed = (smoothed + smoothed.T) / 2.0
    values = RelationshipMatrix(values=smoothed, sample_ids=list(a_hat.sample_ids),
                                kind="smoothed")
    return SmoothedMatrix(values=values, lam=float(lam),
                          zeroed_count=_zeroed_in_triangle(t, ft))


def simple_threshold(a_hat: RelationshipMatrix, lam: float,
                     preserve_diagonal: bool = False) -> SmoothedMatrix:
    """Threshold the matrix in the original (Dirac) basis: TCS with B = I."""
    return smooth_covariance(a_hat, identity_decomposition(a_hat), lam,
                             preserve_diagonal=preserve_diagonal)


def psd_repair(m: SmoothedMatrix) -> SmoothedMatrix:
    """Clip negative eigenvalues to zero so the matrix is positive semi-definite."""
    vals, vecs = np.linalg.eigh(m.values.values)
    if vals.min(initial=0.0) >= 0.0:
        repaired = m.values.values
    else:
        repaired = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        repaired = (repaired + repaired.T) / 2.0
    values = RelationshipMatrix(values=repaired,
                                sample_ids=list(m.values.sample_ids), kind="smoothed")
    return SmoothedMatrix(values=values, lam=m.lam, zeroed_count=m.zeroed_count,
                          psd_repaired=True)


__all__ = ["SmoothedMatrix", "threshold_entries", "smooth_covariance",
           "simple_threshold", "psd_repair"]
