"""Relationship matrices: SNP-based estimation, pedigree expectations, GCTA-style IO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .panel import ScaledPanel

SYMMETRY_TOL = 1e-8


@dataclass
class RelationshipMatrix:
    """Symmetric N x N relationship matrix with sample ids.

    ``kind`` distinguishes pedigree truth, the raw marker-based estimate and
    smoothed estimates.  Symmetry is enforced on construction.
    """

    values: np.ndarray
    sample_ids: list[str]
    kind: str = "raw_estimate"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("relationship matrix must be square")
        if v.shape[0] != len(self.sample_ids):
            raise ValueError("sample_ids length does not match matrix dimension")
        if np.abs(v - v.T).max(initial=0.0) > SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric")
        self.values = (v + v.T) / 2.0
        if self.kind not in ("truth", "raw_estimate", "smoothed"):
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class Pedigree:
    """Pedigree as (id, father, mother) triples; ``None`` for unknown parents.

    Members are topologically sorted on construction (parents before children).
    """

    members: list[tuple[str, str | None, str | None]]
    founders: list[str] = field(init=False)

    def __post_init__(self):
        ids = [m[0] for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate member ids in pedigree")
        by_id = {m[0]: m for m in self.members}
        for mid, fa, mo in self.members:
            if (fa is None) != (mo is None):
                raise ValueError(f"member {mid!r} has exactly one known parent")
            for p in (fa, mo):
                if p is not None and p not in by_id:
                    raise ValueError(f"member {mid!r} references unknown parent {p!r}")
        # Kahn topological sort; detects cycles.
        order, seen = [], set()
        pending = list(self.members)
        while pending:
            progressed = False
            remaining = []
            for mem in pending:
                mid, fa, mo = mem
                if fa is None or (fa in seen and mo in seen):
                    order.append(mem)
                    seen.add(mid)
                    progressed = True
                else:
                    remaining.append(mem)
            if not progressed:
                raise ValueError("pedigree contains a cycle")
            pending = remaining
        self.members = order
        self.founders = [m[0] for m in order if m[1] is None]

    @property
    def ids(self) -> list[str]:
        return [m[0] for m in self.members]


def estimate_grm(z: ScaledPanel) -> RelationshipMatrix:
    """Method-of-moments relationship estimate ZZ'/m from a scaled panel."""
    m = z.n_snps
    if m < 1:
        raise ValueError("scaled panel has no SNPs")
    a = z.z @ z.z.T / m
    return RelationshipMatrix(values=a, sample_ids=list(z.sample_ids), kind="raw_estimate")


def degree_of_relationship(a):
    """Degree R = -log2(a); +inf for a <= 0 (unrelated)."""
    arr = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(arr > 0, -np.log2(np.where(arr > 0, arr, 1.0)), np.inf)
    return float(r) if np.isscalar(a) or arr.ndim == 0 else r


def pedigree_expected_relationship(ped: Pedigree) -> RelationshipMatrix:
    """Expected additive relationships from the pedigree recursion.

    Founders are unrelated and non-inbred; the diagonal is 1.  For member i
    with parents k and l, A_ij = (A_jk + A_jl) / 2 for every earlier member j.
    """
    ids = ped.ids
    idx = {mid: i for i, mid in enumerate(ids)}
    n = len(ids)
    a = np.zeros((n, n))
    done: list[int] = []
    for mid, fa, mo in ped.members:
        i = idx[mid]
        a[i, i] = 1.0
        if fa is not None:
            k, l = idx[fa], idx[mo]
            prev = np.array(done, dtype=int)
            vals = 0.5 * (a[prev, k] + a[prev, l])
            a[i, prev] = vals
            a[prev, i] = vals
        done.append(i)
    return RelationshipMatrix(values=a, sample_ids=ids, kind="truth")


def restrict(matrix: RelationshipMatrix, sample_ids: list[str]) -> RelationshipMatrix:
    """Sub-matrix for the given samples, in the given order."""
    idx = {sid: i for i, sid in enumerate(matrix.sample_ids)}
    sel = np.array([idx[s] for s in sample_ids])
    return RelationshipMatrix(values=matrix.values[np.ix_(sel, sel)],
                              sample_ids=list(sample_ids), kind=matrix.kind)


def load_pedigree(path) -> Pedigree:
    """Read the text pedigree format: one ``id father mother`` line per member, 0 = unknown."""
    members = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"pedigree line {lineno}: expected 'id father mother'")
            mid, fa, mo = parts
            members.append((mid, None if fa == "0" else fa, None if mo == "0" else mo))
    return Pedigree(members=members)


def save_pedigree(ped: Pedigree, path) -> None:
    with open(path, "w") as fh:
        for mid, fa, mo in ped.members:
            fh.write(f"{mid} {fa or 0} {mo or 0}\n")


def write_grm(matrix: RelationshipMatrix, stem) -> None:
    """Write ``<stem>.grm.bin`` (float32 LE lower triangle, row-major, diagonal
    included) and ``<stem>.grm.id`` (one sample id per line)."""
    stem = str(stem)
    n = matrix.n
    tri = matrix.values[np.tril_indices(n)]
    tri.astype("<f4").tofile(stem + ".grm.bin")
    with open(stem + ".grm.id", "w") as fh:
        for sid in matrix.sample_ids:
            fh.write(sid + "\n")


def read_grm(stem, kind: str = "raw_estimate") -> RelationshipMatrix:
    """Read a matrix written by :func:`write_grm`."""
    stem = str(stem)
    with open(stem + ".grm.id") as fh:
        sample_ids = [line.strip() for line in fh if line.strip()]
    n = len(sample_ids)
    tri = np.fromfile(stem + ".grm.bin", dtype="<f4").astype(float)
    expected = n * (n + 1) // 2
    if tri.size != expected:
        raise ValueError(
            f"{stem}.grm.bin holds {tri.size} values; {expected} expected for {n} ids"
        )
    a = np.zeros((n, n))
    a[np.tril_indices(n)] = tri
    a = a + np.tril(a, -1).T
    return RelationshipMatrix(values=a, sample_ids=sample_ids, kind=kind)


__all__ = [
    "RelationshipMatrix", "Pedigree", "estimate_grm", "degree_of_relationship",
    "pedigree_expected_relationship", "restrict", "load_pedigree", "save_pedigree",
    "write_grm", "read_grm",
]
