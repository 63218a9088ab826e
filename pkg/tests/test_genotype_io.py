"""Genotype panel parsing, serialization, allele frequencies and scaling."""

import numpy as np
import pytest

from tcskin import (GenotypePanel, SnpMeta, estimate_allele_freqs,
                    load_genotypes, save_genotypes, scale_genotypes)
from tcskin.panel import MISSING, GenotypeDomainError, GenotypeParseError


def _panel(counts, chroms=None):
    counts = np.asarray(counts, dtype=np.int8)
    n, m = counts.shape
    chroms = chroms or [1] * m
    snps = [SnpMeta(id=f"snp{k}", chromosome=chroms[k], position=k)
            for k in range(m)]
    return GenotypePanel(counts=counts, snps=snps,
                         sample_ids=[f"id{i}" for i in range(n)])


def test_text_roundtrip_exact(tmp_path):
    panel = _panel([[0, 1, 2], [2, MISSING, 0]], chroms=[1, 1, 2])
    path = tmp_path / "panel.txt"
    save_genotypes(panel, path, format="text")
    loaded = load_genotypes(path, format="text")
    assert np.array_equal(loaded.counts, panel.counts)
    assert loaded.sample_ids == panel.sample_ids
    assert [(s.id, s.chromosome, s.position) for s in loaded.snps] == \
           [(s.id, s.chromosome, s.position) for s in panel.snps]


def test_binary_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(7)
    counts = rng.integers(0, 3, size=(6, 20)).astype(np.int8)
    counts[0, 3] = MISSING
    panel = _panel(counts)
    path = tmp_path / "panel.bin"
    save_genotypes(panel, path, format="binary")
    loaded = load_genotypes(path, format="binary")
    assert np.array_equal(loaded.counts, panel.counts)
    assert loaded.sample_ids == panel.sample_ids


def test_text_without_header_gets_synthetic_ids(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("0 1 2\n1 NA 0\n")
    panel = load_genotypes(path)
    assert panel.sample_ids == ["s1", "s2"]
    assert panel.counts[1, 1] == MISSING
    # no sidecar: synthetic single-chromosome metadata
    assert all(s.chromosome == 1 for s in panel.snps)


def test_text_parse_errors(tmp_path):
    ragged = tmp_path / "ragged.txt"
    ragged.write_text("0 1\n0 1 2\n")
    with pytest.raises(GenotypeParseError):
        load_genotypes(ragged)

    bad_token = tmp_path / "bad.txt"
    bad_token.write_text("0 3\n")
    with pytest.raises(GenotypeDomainError):
        load_genotypes(bad_token)

    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    with pytest.raises(GenotypeParseError, match="no samples"):
        load_genotypes(empty)

    mismatch = tmp_path / "mismatch.txt"
    mismatch.write_text("#ids a b c\n0 1\n2 0\n")
    with pytest.raises(GenotypeParseError, match="header"):
        load_genotypes(mismatch)


def test_sidecar_length_must_match(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("0 1 2\n")
    (tmp_path / "p.txt.snps").write_text("a 1 0\nb 1 1\n")
    with pytest.raises(GenotypeParseError):
        load_genotypes(path)


def test_binary_rejects_foreign_files(tmp_path):
    path = tmp_path / "foreign.bin"
    path.write_bytes(b"definitely not genotypes")
    with pytest.raises(GenotypeParseError):
        load_genotypes(path, format="binary")


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_genotypes(tmp_path / "x", format="csv")
    with pytest.raises(ValueError):
        save_genotypes(_panel([[0]]), tmp_path / "x", format="csv")


def test_panel_domain_validation():
    with pytest.raises(GenotypeDomainError):
        _panel([[0, 3]])
    with pytest.raises(ValueError, match="unique"):
        GenotypePanel(counts=np.zeros((2, 1), dtype=np.int8),
                      snps=[SnpMeta(id="s", chromosome=1, position=0)],
                      sample_ids=["a", "a"])


def test_allele_freq_estimation_and_folding():
    panel = _panel([[2, 2, 0], [2, 1, MISSING], [1, 2, 0]])
    est = estimate_allele_freqs(panel)
    # column 0: raw frequency 5/6 > 0.5 -> folded, counts recoded to 2 - c
    assert est.snps[0].maf == pytest.approx(1 / 6)
    assert list(est.counts[:, 0]) == [0, 0, 1]
    # column 2: missing entries excluded from the denominator
    assert est.snps[2].maf == 0.0
    # idempotent
    again = estimate_allele_freqs(est)
    assert np.array_equal(again.counts, est.counts)
    assert [s.maf for s in again.snps] == [s.maf for s in est.snps]


def test_allele_freq_rejects_all_missing_snp():
    panel = _panel([[MISSING, 0], [MISSING, 1]])
    with pytest.raises(ValueError, match="no observed"):
        estimate_allele_freqs(panel)


def test_scaling_formula_and_imputation():
    panel = estimate_allele_freqs(_panel([[0, 2], [1, MISSING], [1, 1], [2, 1]]))
    scaled = scale_genotypes(panel, maf_min=0.05)
    p = np.array([s.maf for s in scaled.snps])
    expect0 = (np.array([0, 1, 1, 2]) - 2 * p[0]) / np.sqrt(2 * p[0] * (1 - p[0]))
    assert np.allclose(scaled.z[:, 0], expect0)
    assert scaled.z[1, 1] == 0.0  # missing entries are imputed to the mean


def test_scaling_drops_low_maf_snps():
    counts = [[0, 1], [0, 1], [0, 0], [0, 2], [0, 1], [0, 1],
              [0, 0], [0, 1], [0, 2], [0, 1], [1, 1], [0, 0]]
    panel = estimate_allele_freqs(_panel(counts))
    scaled = scale_genotypes(panel, maf_min=0.1)
    assert scaled.n_snps == 1
    assert scaled.snps[0].id == "snp1"


def test_scaling_requires_frequencies_and_valid_threshold():
    panel = _panel([[0, 1]])
    with pytest.raises(ValueError, match="frequencies"):
        scale_genotypes(panel)
    est = estimate_allele_freqs(_panel([[0, 1], [1, 1]]))
    with pytest.raises(ValueError, match="positive"):
        scale_genotypes(est, maf_min=0.0)
    with pytest.raises(ValueError, match="MAF filter"):
        scale_genotypes(est, maf_min=0.6)
