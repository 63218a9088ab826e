"""Accuracy reports: RMSE and zeroing fractions by degree of relationship."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grm import RelationshipMatrix

DEFAULT_EPSILON = 1e-5


@dataclass(frozen=True)
class DegreeBin:
    label: str
    lo: float  # exclusive lower edge on R
    hi: float  # inclusive upper edge


def default_bins(r_min: int = 3, r_max: int = 11) -> list[DegreeBin]:
    """Integer degree bins r_min..r_max plus closer-than-r_min, beyond-r_max and
    an 'unrelated' bin (truth <= 0, R = +inf)."""
    bins = [DegreeBin(f"lt{r_min}", 0.0, r_min - 0.5)]
    bins += [DegreeBin(str(r), r - 0.5, r + 0.5) for r in range(r_min, r_max + 1)]
    bins.append(DegreeBin(f"gt{r_max}", r_max + 0.5, np.inf))
    bins.append(DegreeBin("unrelated", np.inf, np.inf))
    return bins


def _pair_bins(truth: RelationshipMatrix, bins):
    """Assign every unordered pair i<j to exactly one bin; returns a dict
    label -> boolean mask over the upper-triangle pairs."""
    n = truth.n
    iu = np.triu_indices(n, k=1)
    a = truth.values[iu]
    with np.errstate(divide="ignore"):
        r = np.where(a > 0, -np.log2(np.where(a > 0, a, 1.0)), np.inf)
    masks = {}
    assigned = np.zeros(r.size, dtype=bool)
    for b in bins:
        if b.label == "unrelated":
            mask = ~np.isfinite(r)
        else:
            mask = np.isfinite(r) & (r > b.lo) & (r <= b.hi) & ~assigned
        masks[b.label] = mask
        assigned |= mask
    if not assigned.all():
        raise ValueError("degree bins do not cover all pairs")
    return iu, masks


def rmse_by_degree(truth: RelationshipMatrix, estimate: RelationshipMatrix,
                   method: str = "raw", bins=None):
    """Rows (bin label, method, rmse, pair count) over off-diagonal pairs."""
    if truth.n != estimate.n:
        raise ValueError("dimension mismatch between truth and estimate")
    bins = bins or default_bins()
    iu, masks = _pair_bins(truth, bins)
    err = estimate.values[iu] - truth.values[iu]
    rows = []
    for b in bins:
        mask = masks[b.label]
        count = int(mask.sum())
        rmse = float(np.sqrt(np.mean(err[mask] ** 2))) if count else float("nan")
        rows.append((b.label, method, rmse, count))
    return rows


def zero_proportion(estimate: RelationshipMatrix, truth: RelationshipMatrix,
                    method: str = "raw", bins=None,
                    epsilon: float = DEFAULT_EPSILON):
    """Rows (bin label, method, fraction of pairs with |estimate| < epsilon)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    bins = bins or default_bins()
    iu, masks = _pair_bins(truth, bins)
    zeroed = np.abs(estimate.values[iu]) < epsilon
    rows = []
    for b in bins:
        mask = masks[b.label]
        frac = float(zeroed[mask].mean()) if mask.any() else float("nan")
        rows.append((b.label, method, frac))
    return rows


def overall_rmse(truth: RelationshipMatrix, estimate: RelationshipMatrix) -> float:
    """RMSE over all off-diagonal pairs."""
    iu = np.triu_indices(truth.n, k=1)
    return float(np.sqrt(np.mean((estimate.values[iu] - truth.values[iu]) ** 2)))


def evaluate_methods(truth: RelationshipMatrix, estimates: dict, bins=None,
                     epsilon: float = DEFAULT_EPSILON):
    """Evaluate several methods at once.

    ``estimates`` maps method name -> RelationshipMatrix.  Returns a dict with
    ``per_degree``, ``zero_proportions`` and ``overall`` row lists.
    """
    bins = bins or default_bins()
    per_degree, zero_rows, overall = [], [], []
    for method, est in estimates.items():
        per_degree.extend(rmse_by_degree(truth, est, method=method, bins=bins))
        zero_rows.extend(zero_proportion(est, truth, method=method, bins=bins,
                                         epsilon=epsilon))
        overall.append((method, overall_rmse(truth, est)))
    return {"per_degree": per_degree, "zero_proportions": zero_rows,
            "overall": overall}


def write_rmse_csv(rows, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["degree_bin", "method", "rmse", "pairs"])
        for label, method, rmse, count in rows:
            writer.writerow([label, method, repr(float(rmse)), count])


def write_zero_csv(rows, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["degree_bin", "method", "zero_fraction"])
        for label, method, frac in rows:
            writer.writerow([label, method, repr(float(frac))])


__all__ = [
    "DegreeBin", "default_bins", "rmse_by_degree", "zero_proportion",
    "overall_rmse", "evaluate_methods", "write_rmse_csv", "write_zero_csv",
    "DEFAULT_EPSILON",
]
