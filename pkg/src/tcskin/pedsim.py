"""Synthetic ground truth: founder haplotypes with block LD, gene dropping
through multi-generation pedigrees, family-structured sampling, and phenotypes
under the additive polygenic model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grm import Pedigree, RelationshipMatrix, pedigree_expected_relationship, restrict
from .panel import GenotypePanel, ScaledPanel, SnpMeta
from .reml import PhenotypeVector


@dataclass
class PoolParams:
    """Founder haplotype pool: LD blocks with a small per-block pattern pool."""

    n_snps: int = 10000
    n_chromosomes: int = 20
    mean_block_len: float = 5.0
    pool_size: int = 4
    maf_low: float = 0.05
    maf_high: float = 0.5

    def __post_init__(self):
        if self.n_snps <= 0 or self.n_chromosomes <= 0:
            raise ValueError("n_snps and n_chromosomes must be positive")
        if self.n_snps < self.n_chromosomes:
            raise ValueError("need at least one SNP per chromosome")
        if self.mean_block_len < 1 or self.pool_size < 1:
            raise ValueError("block length and pool size must be >= 1")
        if not 0 < self.maf_low <= self.maf_high <= 0.5:
            raise ValueError("allele frequency range must satisfy 0 < low <= high <= 0.5")


@dataclass
class HaplotypePool:
    haplotypes: np.ndarray  # H x m uint8
    snps: list[SnpMeta]
    block_structure: list[tuple[int, int]]

    @property
    def n_haplotypes(self) -> int:
        return self.haplotypes.shape[0]

    @property
    def n_snps(self) -> int:
        return self.haplotypes.shape[1]


@dataclass
class SimulationSpec:
    n_families: int = 20
    family_size: int = 10
    generations: int = 7
    founders_per_family: int = 39
    recomb_rate: float = 1.0       # expected crossovers per chromosome per meiosis
    sampling_bias: float = 1.5     # weight base favoring distant relatives (>1)
    causal_count: int = 500
    h2_true: float = 0.5
    rng_seed: int = 0
    min_chain_depth: int = 2       # 2 keeps the closest sampled pair at R=3
    n_unrelated: int = 5           # unrelated singletons per family
    pool: PoolParams = field(default_factory=PoolParams)

    def __post_init__(self):
        if min(self.n_families, self.family_size, self.generations,
               self.founders_per_family, self.causal_count) <= 0:
            raise ValueError("all counts must be positive")
        if not 0.0 <= self.h2_true <= 1.0:
            raise ValueError("h2_true must lie in [0, 1]")
        if self.min_chain_depth < 1 or self.min_chain_depth >= self.generations:
            raise ValueError("min_chain_depth must lie in [1, generations)")


def generate_founders(n_haplotypes: int, params: PoolParams, rng) -> HaplotypePool:
    """Draw founder haplotypes: geometric LD blocks, each haplotype picking one
    of ``pool_size`` block patterns; allele frequencies uniform on the spectrum."""
    m = params.n_snps
    per_chrom = np.full(params.n_chromosomes, m // params.n_chromosomes)
    per_chrom[: m % params.n_chromosomes] += 1
    snps = []
    for c, size in enumerate(per_chrom, start=1):
        snps.extend(SnpMeta(id=f"snp{c}_{k}", chromosome=c, position=k)
                    for k in range(size))

    haplotypes = np.empty((n_haplotypes, m), dtype=np.uint8)
    blocks = []
    start = 0
    bounds = np.cumsum(per_chrom)
    while start < m:
        length = 1 if params.mean_block_len <= 1 else int(rng.geometric(1.0 / params.mean_block_len))
        end = min(start + max(length, 1), m)
        # blocks never straddle a chromosome boundary
        for b in bounds:
            if start < b < end:
                end = int(b)
                break
        p = rng.uniform(params.maf_low, params.maf_high, size=end - start)
        patterns = (rng.random((params.pool_size, end - start)) < p).astype(np.uint8)
        choice = rng.integers(0, params.pool_size, size=n_haplotypes)
        haplotypes[:, start:end] = patterns[choice]
        blocks.append((start, end))
        start = end
    return HaplotypePool(haplotypes=haplotypes, snps=snps, block_structure=blocks)


def _chromosome_slices(snps) -> list[slice]:
    slices = []
    start = 0
    for k in range(1, len(snps) + 1):
        if k == len(snps) or snps[k].chromosome != snps[start].chromosome:
            slices.append(slice(start, k))
            start = k
    return slices


def _recombine(hap_a, hap_b, lab_a, lab_b, slices, rate, rng):
    """One meiosis: per-chromosome Poisson crossovers at uniform positions."""
    out = np.empty_like(hap_a)
    lab = np.empty_like(lab_a)
    for sl in slices:
        length = sl.stop - sl.start
        n_cross = rng.poisson(rate)
        use_a = rng.random() < 0.5
        if n_cross == 0:
            src, srclab = (hap_a, lab_a) if use_a else (hap_b, lab_b)
            out[sl] = src[sl]
            lab[sl] = srclab[sl]
            continue
        cuts = np.sort(rng.integers(1, length, size=n_cross)) if length > 1 else np.array([], dtype=int)
        mask = np.zeros(length, dtype=bool)  # True -> take from hap_a
        current = use_a
        prev = 0
        for cut in list(cuts) + [length]:
            mask[prev:cut] = current
            current = not current
            prev = cut
        out[sl] = np.where(mask, hap_a[sl], hap_b[sl])
        lab[sl] = np.where(mask, lab_a[sl], lab_b[sl])
    return out, lab


def drop_genomes(pool: HaplotypePool, pedigree: Pedigree, recomb_rate: float, rng,
                 founder_hap_offset: int = 0):
    """Transmit (recombined) haplotypes down the pedigree.

    Founders take consecutive haplotype pairs from the pool starting at
    ``founder_hap_offset``.  Returns (genotypes dict id -> uint8 vector,
    haplotype dict id -> (hapA, hapB, labA, labB)) where labels identify the
    founder haplotype of origin for IBD bookkeeping.
    """
    slices = _chromosome_slices(pool.snps)
    haps = {}
    genotypes = {}
    next_hap = founder_hap_offset
    for mid, fa, mo in pedigree.members:
        if fa is None:
            if next_hap + 2 > pool.n_haplotypes:
                raise ValueError("haplotype pool exhausted: too few haplotypes for founders")
            ha = pool.haplotypes[next_hap]
            hb = pool.haplotypes[next_hap + 1]
            la = np.full(pool.n_snps, next_hap, dtype=np.int32)
            lb = np.full(pool.n_snps, next_hap + 1, dtype=np.int32)
            next_hap += 2
        else:
            fha, fhb, fla, flb = haps[fa]
            mha, mhb, mla, mlb = haps[mo]
            ha, la = _recombine(fha, fhb, fla, flb, slices, recomb_rate, rng)
            hb, lb = _recombine(mha, mhb, mla, mlb, slices, recomb_rate, rng)
        haps[mid] = (ha, hb, la, lb)
        genotypes[mid] = (ha + hb).astype(np.uint8)
    return genotypes, haps


def realized_relationship(haps, id_i: str, id_j: str) -> float:
    """Realized additive relationship: twice the locus-average kinship computed
    from founder-haplotype origin labels."""
    _, _, la_i, lb_i = haps[id_i]
    _, _, la_j, lb_j = haps[id_j]
    matches = ((la_i == la_j).astype(np.int32) + (la_i == lb_j)
               + (lb_i == la_j) + (lb_i == lb_j))
    return float(matches.mean() / 2.0)


def family_pedigree(prefix: str, spec: SimulationSpec):
    """Parameterized family: an ancestral couple with descent chains of varying
    depth (each generation a descendant marries a fresh founder), plus a few
    unrelated singletons.  Returns (Pedigree, sampleable ids).

    Two chain terminals at depths d1 and d2 are related with
    R = d1 + d2 - 1, so depths in [min_chain_depth, generations-1] realize the
    target range of relationship degrees.
    """
    members = [(f"{prefix}a", None, None), (f"{prefix}b", None, None)]
    budget = spec.founders_per_family - 2 - spec.n_unrelated
    depths = []
    depth_cycle = list(range(spec.min_chain_depth, spec.generations))
    idx = 0
    misses = 0
    while len(depths) < 15 and misses < len(depth_cycle):
        d = depth_cycle[idx % len(depth_cycle)]
        if d - 1 <= budget:
            depths.append(d)
            budget -= d - 1
            misses = 0
        else:
            misses += 1
        idx += 1
    if len(depths) < 2:
        raise ValueError("founder budget too small for two descent chains")

    sampleable = []
    for c, depth in enumerate(depths):
        child = f"{prefix}c{c}_1"
        members.append((child, f"{prefix}a", f"{prefix}b"))
        for t in range(2, depth + 1):
            spouse = f"{prefix}c{c}_sp{t - 1}"
            members.append((spouse, None, None))
            nxt = f"{prefix}c{c}_{t}"
            members.append((nxt, child, spouse))
            child = nxt
        sampleable.append(child)
    for u in range(spec.n_unrelated):
        uid = f"{prefix}u{u}"
        members.append((uid, None, None))
        sampleable.append(uid)
    return Pedigree(members=members), sampleable


def _sample_members(expected: RelationshipMatrix, sampleable, size, bias, rng):
    """Sequentially sample ``size`` ids, weighting candidates by
    bias**(mean degree of relationship to the already chosen), capped at 13."""
    if size > len(sampleable):
        raise ValueError(f"cannot sample {size} members from {len(sampleable)}")
    idx = {sid: i for i, sid in enumerate(expected.sample_ids)}
    chosen = [sampleable[int(rng.integers(len(sampleable)))]]
    while len(chosen) < size:
        remaining = [s for s in sampleable if s not in chosen]
        weights = np.empty(len(remaining))
        for k, cand in enumerate(remaining):
            vals = np.array([expected.values[idx[cand], idx[c]] for c in chosen])
            with np.errstate(divide="ignore"):
                degs = np.where(vals > 0, -np.log2(np.where(vals > 0, vals, 1.0)), 13.0)
            weights[k] = bias ** min(float(degs.mean()), 13.0)
        weights /= weights.sum()
        chosen.append(remaining[int(rng.choice(len(remaining), p=weights))])
    return chosen


def simulate_panel(spec: SimulationSpec):
    """Simulate a family-structured genotype panel with known ground truth.

    Returns (GenotypePanel, truth RelationshipMatrix, Pedigree over all
    simulated members).  Families are independent; the truth matrix is
    block-diagonal across families.
    """
    root = np.random.SeedSequence(spec.rng_seed)
    pool_seed, *family_seeds = root.spawn(spec.n_families + 1)
    rng_pool = np.random.default_rng(pool_seed)

    peds, sampleables = zip(*(family_pedigree(f"f{i}_", spec)
                              for i in range(spec.n_families)))
    founders_total = sum(len(p.founders) for p in peds)
    pool = generate_founders(2 * founders_total, spec.pool, rng_pool)

    counts_rows = []
    sample_ids = []
    truth_blocks = []
    all_members = []
    offset = 0
    for fam, (ped, pool_ids) in enumerate(zip(peds, sampleables)):
        rng = np.random.default_rng(family_seeds[fam])
        genotypes, _ = drop_genomes(pool, ped, spec.recomb_rate, rng,
                                    founder_hap_offset=offset)
        offset += 2 * len(ped.founders)
        expected = pedigree_expected_relationship(ped)
        chosen = _sample_members(expected, pool_ids, spec.family_size,
                                 spec.sampling_bias, rng)
        for sid in chosen:
            counts_rows.append(genotypes[sid])
            sample_ids.append(sid)
        truth_blocks.append(restrict(expected, chosen).values)
        all_members.extend(ped.members)

    counts = np.vstack(counts_rows).astype(np.int8)
    panel = GenotypePanel(counts=counts, snps=list(pool.snps), sample_ids=sample_ids)

    n = len(sample_ids)
    truth = np.zeros((n, n))
    pos = 0
    for block in truth_blocks:
        k = block.shape[0]
        truth[pos:pos + k, pos:pos + k] = block
        pos += k
    truth_matrix = RelationshipMatrix(values=truth, sample_ids=sample_ids, kind="truth")
    return panel, truth_matrix, Pedigree(members=all_members)


def simulate_phenotype(panel: ScaledPanel, spec: SimulationSpec, rng=None):
    """Additive polygenic phenotype: y = mu + Z_c u + e targeting h2_true.

    The causal-effect variance is set from the empirical variance of Z_c u so
    that the expected genetic variance is h2_true (total variance 1).  Returns
    (PhenotypeVector, causal SNP indices).
    """
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    m = panel.n_snps
    if spec.causal_count > m:
        raise ValueError(f"causal_count {spec.causal_count} exceeds panel size {m}")
    causal = np.sort(rng.choice(m, size=spec.causal_count, replace=False))
    zc = panel.z[:, causal]
    sigma_g2 = spec.h2_true
    sigma_e2 = 1.0 - spec.h2_true
    mean_rss = float(np.mean(np.sum(zc * zc, axis=1)))
    sigma_u = np.sqrt(sigma_g2 / mean_rss) if mean_rss > 0 else 0.0
    u = rng.normal(0.0, sigma_u, size=spec.causal_count)
    g = zc @ u
    e = rng.normal(0.0, np.sqrt(sigma_e2), size=panel.n_samples)
    y = g + e
    return PhenotypeVector(y=y, sample_ids=list(panel.sample_ids)), causal


__all__ = [
    "PoolParams", "HaplotypePool", "SimulationSpec", "generate_founders",
    "drop_genomes", "realized_relationship", "family_pedigree",
    "simulate_panel", "simulate_phenotype",
]
