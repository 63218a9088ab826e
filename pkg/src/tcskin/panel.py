"""Genotype panel loading, validation, allele-frequency estimation and scaling."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

MISSING = -1  # sentinel in count matrices (int8)
_MISSING_BYTE = 255  # sentinel on disk (uint8)

_MAGIC = b"TCSKGENO"


class GenotypeParseError(ValueError):
    """Raised when a genotype file cannot be parsed."""


class GenotypeDomainError(ValueError):
    """Raised when genotype values fall outside {0, 1, 2, missing}."""


@dataclass(frozen=True)
class SnpMeta:
    id: str
    chromosome: int
    position: int
    maf: float | None = None


@dataclass
class GenotypePanel:
    """Minor-allele-count matrix (N samples x m SNPs) with per-SNP metadata.

    Entries are in {0, 1, 2} with ``MISSING`` marking unobserved genotypes.
    """

    counts: np.ndarray
    snps: list[SnpMeta]
    sample_ids: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int8)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a 2-D matrix")
        n, m = self.counts.shape
        if len(self.snps) != m:
            raise ValueError(f"got {len(self.snps)} SNP records for {m} columns")
        if len(self.sample_ids) != n:
            raise ValueError(f"got {len(self.sample_ids)} sample ids for {n} rows")
        if len(set(self.sample_ids)) != n:
            raise ValueError("sample ids are not unique")
        bad = (self.counts != MISSING) & ((self.counts < 0) | (self.counts > 2))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise GenotypeDomainError(
                f"invalid genotype value {self.counts[i, j]} at row {i}, column {j}"
            )

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_snps(self) -> int:
        return self.counts.shape[1]


@dataclass
class ScaledPanel:
    """Centered and variance-standardized genotype matrix, no missing entries."""

    z: np.ndarray
    snps: list[SnpMeta]
    sample_ids: list[str]
    source: GenotypePanel | None = None

    @property
    def n_samples(self) -> int:
        return self.z.shape[0]

    @property
    def n_snps(self) -> int:
        return self.z.shape[1]


def _default_snps(m: int) -> list[SnpMeta]:
    return [SnpMeta(id=f"snp{k}", chromosome=1, position=k) for k in range(m)]


def _parse_snp_lines(lines) -> list[SnpMeta]:
    snps = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GenotypeParseError(
                f"SNP metadata line {lineno}: expected 'id chrom pos', got {line!r}"
            )
        snps.append(SnpMeta(id=parts[0], chromosome=int(parts[1]), position=int(parts[2])))
    return snps


def load_genotypes(path, format: str = "text", snp_path=None) -> GenotypePanel:
    """Load a genotype panel from ``path``.

    Text format: optional ``#ids id1 id2 ...`` header, then one sample per row
    with whitespace-separated entries from {0, 1, 2, NA}.  SNP metadata is read
    from ``snp_path`` (default ``<path>.snps``) when present; otherwise synthetic
    single-chromosome metadata is generated.
    """
    path = Path(path)
    if format == "binary":
        return _load_binary(path)
    if format != "text":
        raise ValueError(f"unknown genotype format {format!r}")

    sample_ids = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#ids"):
                sample_ids = line.split()[1:]
                continue
            if line.startswith("#"):
                continue
            entries = line.split()
            row = np.empty(len(entries), dtype=np.int8)
            for j, tok in enumerate(entries):
                if tok == "NA":
                    row[j] = MISSING
                elif tok in ("0", "1", "2"):
                    row[j] = int(tok)
                else:
                    raise GenotypeDomainError(
                        f"line {lineno}, column {j + 1}: invalid entry {tok!r}"
                    )
            rows.append((lineno, row))

    if not rows:
        raise GenotypeParseError(f"{path}: no samples")
    m = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != m:
            raise GenotypeParseError(
                f"line {lineno}: expected {m} entries, got {len(row)}"
            )
    counts = np.vstack([row for _, row in rows])
    n = counts.shape[0]
    if sample_ids is None:
        sample_ids = [f"s{i + 1}" for i in range(n)]
    if len(sample_ids) != n:
        raise GenotypeParseError(
            f"header lists {len(sample_ids)} ids but file has {n} sample rows"
        )

    snp_path = Path(snp_path) if snp_path is not None else Path(str(path) + ".snps")
    if snp_path.exists():
        with open(snp_path) as fh:
            snps = _parse_snp_lines(fh)
        if len(snps) != m:
            raise GenotypeParseError(
                f"{snp_path}: {len(snps)} SNP records for {m} genotype columns"
            )
    else:
        snps = _default_snps(m)
    return GenotypePanel(counts=counts, snps=snps, sample_ids=sample_ids)


def save_genotypes(panel: GenotypePanel, path, format: str = "text") -> None:
    """Write a panel in the text or binary on-disk format (plus .snps sidecar for text)."""
    path = Path(path)
    if format == "binary":
        _save_binary(panel, path)
        return
    if format != "text":
        raise ValueError(f"unknown genotype format {format!r}")
    with open(path, "w") as fh:
        fh.write("#ids " + " ".join(panel.sample_ids) + "\n")
        for row in panel.counts:
            fh.write(" ".join("NA" if v == MISSING else str(v) for v in row) + "\n")
    with open(str(path) + ".snps", "w") as fh:
        for s in panel.snps:
            fh.write(f"{s.id} {s.chromosome} {s.position}\n")


def _save_binary(panel: GenotypePanel, path: Path) -> None:
    id_block = ("\n".join(panel.sample_ids)).encode()
    snp_block = "\n".join(
        f"{s.id} {s.chromosome} {s.position}" for s in panel.snps
    ).encode()
    body = panel.counts.astype(np.int16)
    body[body == MISSING] = _MISSING_BYTE
    # column-major per SNP: all N genotypes of SNP 0, then SNP 1, ...
    col_major = np.asfortranarray(body.astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIII", 1, panel.n_samples, panel.n_snps,
                             len(id_block), len(snp_block)))
        fh.write(id_block)
        fh.write(snp_block)
        fh.write(col_major.tobytes(order="F"))


def _load_binary(path: Path) -> GenotypePanel:
    raw = path.read_bytes()
    if len(raw) < len(_MAGIC) + 20 or raw[: len(_MAGIC)] != _MAGIC:
        raise GenotypeParseError(f"{path}: not a tcskin binary genotype file")
    off = len(_MAGIC)
    version, n, m, id_len, snp_len = struct.unpack_from("<IIIII", raw, off)
    if version != 1:
        raise GenotypeParseError(f"{path}: unsupported version {version}")
    off += 20
    sample_ids = raw[off:off + id_len].decode().split("\n") if id_len else []
    off += id_len
    snps = _parse_snp_lines(raw[off:off + snp_len].decode().split("\n"))
    off += snp_len
    expected = n * m
    body = np.frombuffer(raw[off:], dtype=np.uint8)
    if body.size != expected:
        raise GenotypeParseError(
            f"{path}: expected {expected} genotype bytes, found {body.size}"
        )
    grid = body.reshape((n, m), order="F")
    counts = np.where(grid == _MISSING_BYTE, np.int8(MISSING), grid.astype(np.int8))
    return GenotypePanel(counts=counts, snps=snps, sample_ids=sample_ids)


def estimate_allele_freqs(panel: GenotypePanel) -> GenotypePanel:
    """Estimate per-SNP minor allele frequencies from sample counts.

    Frequencies are folded to <= 0.5: SNPs whose raw allele-1 frequency exceeds
    0.5 have their counts recoded (c -> 2 - c) so that counts always refer to
    the minor allele.  Idempotent.
    """
    counts = panel.counts.copy()
    obs = counts != MISSING
    n_obs = obs.sum(axis=0)
    if (n_obs == 0).any():
        k = int(np.argmax(n_obs == 0))
        raise ValueError(f"SNP {panel.snps[k].id!r} has no observed genotypes")
    totals = np.where(obs, counts, 0).sum(axis=0)
    freq = totals / (2.0 * n_obs)
    flip = freq > 0.5
    if flip.any():
        flipped = counts[:, flip]
        flipped = np.where(flipped == MISSING, np.int8(MISSING), 2 - flipped)
        counts[:, flip] = flipped
        # recompute from the recoded counts so re-estimation is bit-identical
        obs = counts != MISSING
        totals = np.where(obs, counts, 0).sum(axis=0)
        freq = totals / (2.0 * n_obs)
    snps = [replace(s, maf=float(p)) for s, p in zip(panel.snps, freq)]
    return GenotypePanel(counts=counts, snps=snps, sample_ids=list(panel.sample_ids))


def scale_genotypes(panel: GenotypePanel, maf_min: float = 0.05) -> ScaledPanel:
    """Center and standardize genotype columns: z = (c - 2p) / sqrt(2p(1-p)).

    SNPs with maf < maf_min are dropped.  Missing entries are imputed to the
    column mean 2p (scaled value 0) before scaling.
    """
    if maf_min <= 0:
        raise ValueError("maf_min must be positive")
    if any(s.maf is None for s in panel.snps):
        raise ValueError("allele frequencies not estimated; run estimate_allele_freqs first")
    maf = np.array([s.maf for s in panel.snps])
    keep = maf >= maf_min
    if not keep.any():
        raise ValueError("no SNPs survive MAF filter")
    counts = panel.counts[:, keep].astype(float)
    p = maf[keep]
    counts[panel.counts[:, keep] == MISSING] = np.nan
    z = (counts - 2.0 * p) / np.sqrt(2.0 * p * (1.0 - p))
    z = np.where(np.isnan(z), 0.0, z)
    snps = [s for s, k in zip(panel.snps, keep) if k]
    return ScaledPanel(z=z, snps=snps, sample_ids=list(panel.sample_ids), source=panel)
