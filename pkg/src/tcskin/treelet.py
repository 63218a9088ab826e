"""Treelet decomposition: hierarchical pairwise Jacobi rotations of a covariance
matrix yielding an orthonormal multiscale basis B and the transformed matrix
T(A) = B' A B.

The construction is greedy: at every level the pair of active variables with
the largest similarity (absolute correlation by default) is rotated so that
their covariance becomes zero; the lower-variance rotated coordinate is then
retired as a "difference" variable and never participates in later rotations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .grm import RelationshipMatrix


@dataclass(frozen=True)
class Rotation:
    level: int
    i: int
    j: int
    c: float
    s: float
    retained: int
    retired: int


@dataclass
class TreeletDecomposition:
    rotations: list[Rotation]
    basis: np.ndarray
    transformed: np.ndarray
    tree: list[tuple[int, int]]
    levels: int
    sample_ids: list[str] | None = None

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def to_json(self, path) -> None:
        """Serialize the rotation list; the basis is reconstructable from it."""
        doc = {
            "format": "tcskin-treelet",
            "version": 1,
            "n": self.n,
            "levels": self.levels,
            "sample_ids": self.sample_ids,
            "rotations": [
                {"level": r.level, "i": r.i, "j": r.j, "c": r.c, "s": r.s,
                 "retained": r.retained, "retired": r.retired}
                for r in self.rotations
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)

    @classmethod
    def from_json(cls, path, matrix: RelationshipMatrix | None = None):
        """Rebuild a decomposition from its rotation list.

        ``transformed`` is recomputed when the defining matrix is supplied,
        otherwise left as None.
        """
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != "tcskin-treelet":
            raise ValueError(f"{path}: not a treelet decomposition file")
        n = doc["n"]
        rotations = [Rotation(**r) for r in doc["rotations"]]
        basis = np.eye(n)
        for r in rotations:
            _rotate_basis_columns(basis, r.i, r.j, r.c, r.s)
        transformed = None
        if matrix is not None:
            transformed = basis.T @ matrix.values @ basis
        return cls(rotations=rotations, basis=basis, transformed=transformed,
                   tree=[(r.i, r.j) for r in rotations], levels=doc["levels"],
                   sample_ids=doc.get("sample_ids"))


def jacobi_pair_rotation(a: float, b: float, d: float):
    """Rotation zeroing the off-diagonal of [[a, d], [d, b]].

    Returns (c, s, var_i, var_j) with theta in [-pi/4, pi/4] computed via the
    two-argument arctangent; var_i and var_j are the rotated variances of the
    first and second coordinate.
    """
    if d == 0.0:
        return 1.0, 0.0, a, b
    theta = 0.5 * math.atan2(2.0 * d, a - b)
    if theta > math.pi / 4:
        theta -= math.pi / 2
    elif theta < -math.pi / 4:
        theta += math.pi / 2
    c, s = math.cos(theta), math.sin(theta)
    var_i = c * c * a + 2.0 * c * s * d + s * s * b
    var_j = s * s * a - 2.0 * c * s * d + c * c * b
    return c, s, var_i, var_j


def _rotate_basis_columns(basis: np.ndarray, i: int, j: int, c: float, s: float) -> None:
    bi = basis[:, i].copy()
    bj = basis[:, j].copy()
    basis[:, i] = c * bi + s * bj
    basis[:, j] = -s * bi + c * bj


def _similarity_row(cov, i, kind):
    """Similarity of variable i against all variables (masked later)."""
    if kind == "covariance":
        return np.abs(cov[i])
    var = np.diag(cov)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.sqrt(var[i] * var)
        sim = np.abs(cov[i]) / denom
    sim[~np.isfinite(sim)] = 0.0  # zero-variance variables have similarity 0
    return sim


def build_treelet(a_hat: RelationshipMatrix, levels: int | None = None,
                  similarity: str = "correlation") -> TreeletDecomposition:
    """Build the treelet decomposition of a symmetric matrix.

    ``levels`` defaults to N-1 (top of the tree).  Ties in pair selection are
    broken by the lexicographically smallest (i, j); after a rotation the
    coordinate with the larger rotated variance stays active, with variance
    ties keeping the smaller index active.
    """
    if similarity not in ("correlation", "covariance"):
        raise ValueError(f"unknown similarity {similarity!r}")
    cov = np.array(a_hat.values, dtype=float)
    n = cov.shape[0]
    if n < 2:
        raise ValueError("need at least 2 variables")
    if levels is None:
        levels = n - 1
    if not 1 <= levels <= n - 1:
        raise ValueError(f"levels must be in [1, {n - 1}]")

    basis = np.eye(n)
    active = np.ones(n, dtype=bool)
    rotations: list[Rotation] = []

    # Upper-triangular similarity table over active pairs; inactive rows/cols
    # are kept at -1 so argmax never selects them.
    sim = np.full((n, n), -1.0)
    for i in range(n):
        row = _similarity_row(cov, i, similarity)
        sim[i, i + 1:] = row[i + 1:]

    for level in range(1, levels + 1):
        flat = int(np.argmax(sim))
        i, j = divmod(flat, n)  # argmax returns the first (lexicographically
        # smallest) maximizer because sim is scanned row-major
        c, s, var_i, var_j = jacobi_pair_rotation(cov[i, i], cov[j, j], cov[i, j])

        # apply rotation to rows/columns i and j of the working covariance
        ri = cov[i, :].copy()
        rj = cov[j, :].copy()
        cov[i, :] = c * ri + s * rj
        cov[j, :] = -s * ri + c * rj
        cov[:, i] = cov[i, :]
        cov[:, j] = cov[j, :]
        cov[i, i] = var_i
        cov[j, j] = var_j
        cov[i, j] = cov[j, i] = 0.0

        _rotate_basis_columns(basis, i, j, c, s)

        # i < j always; equal variances keep the smaller index active
        retained, retired = (i, j) if var_i >= var_j else (j, i)
        rotations.append(Rotation(level=level, i=i, j=j, c=c, s=s,
                                  retained=retained, retired=retired))
        active[retired] = False
        sim[retired, :] = -1.0
        sim[:, retired] = -1.0
        row = np.where(active, _similarity_row(cov, retained, similarity), -1.0)
        sim[retained, retained + 1:] = row[retained + 1:]
        sim[:retained, retained] = row[:retained]

    transformed = basis.T @ np.asarray(a_hat.values, dtype=float) @ basis
    transformed = (transformed + transformed.T) / 2.0
    return TreeletDecomposition(rotations=rotations, basis=basis,
                                transformed=transformed,
                                tree=[(r.i, r.j) for r in rotations],
                                levels=levels, sample_ids=list(a_hat.sample_ids))


def transform_covariance(decomp: TreeletDecomposition, a: RelationshipMatrix | np.ndarray) -> np.ndarray:
    """Change of basis B' A B for an arbitrary symmetric matrix A."""
    values = a.values if isinstance(a, RelationshipMatrix) else np.asarray(a, dtype=float)
    if values.shape != decomp.basis.shape:
        raise ValueError(
            f"dimension mismatch: matrix is {values.shape}, basis is {decomp.basis.shape}"
        )
    t = decomp.basis.T @ values @ decomp.basis
    return (t + t.T) / 2.0


def identity_decomposition(matrix: RelationshipMatrix) -> TreeletDecomposition:
    """Degenerate Dirac-basis decomposition (B = I): thresholding in this basis
    is simple thresholding of the original matrix."""
    n = matrix.n
    return TreeletDecomposition(rotations=[], basis=np.eye(n),
                                transformed=np.array(matrix.values, dtype=float),
                                tree=[], levels=0,
                                sample_ids=list(matrix.sample_ids))


def pca_decomposition(matrix: RelationshipMatrix) -> TreeletDecomposition:
    """Eigenbasis baseline: B from PCA of the matrix, T(A) diagonal."""
    vals, vecs = np.linalg.eigh(matrix.values)
    order = np.argsort(vals)[::-1]
    basis = vecs[:, order]
    return TreeletDecomposition(rotations=[], basis=basis,
                                transformed=np.diag(vals[order]),
                                tree=[], levels=0,
                                sample_ids=list(matrix.sample_ids))


__all__ = [
    "Rotation", "TreeletDecomposition", "jacobi_pair_rotation", "build_treelet",
    "transform_covariance", "identity_decomposition", "pca_decomposition",
]
