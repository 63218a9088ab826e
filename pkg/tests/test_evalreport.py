"""Accuracy reports: RMSE and zeroing fractions by degree of relationship."""

import csv

import numpy as np
import pytest

from tcskin import overall_rmse, rmse_by_degree, zero_proportion
from tcskin.evalreport import (DegreeBin, evaluate_methods, write_rmse_csv,
                               write_zero_csv)

from conftest import as_matrix


def _truth_pair(value):
    return as_matrix(np.array([[1.0, value], [value, 1.0]]), kind="truth")


def test_perfect_estimate_has_zero_rmse():
    truth = _truth_pair(0.125)
    rows = rmse_by_degree(truth, truth, method="exact")
    for label, method, rmse, count in rows:
        assert method == "exact"
        if count:
            assert rmse == 0.0


def test_single_pair_rmse_arithmetic():
    truth = _truth_pair(0.125)
    est = as_matrix(np.array([[1.0, 0.135], [0.135, 1.0]]))
    rows = {label: (rmse, count)
            for label, _, rmse, count in rmse_by_degree(truth, est)}
    assert rows["3"][1] == 1
    assert rows["3"][0] == pytest.approx(0.01)
    assert rows["unrelated"][1] == 0


def test_default_bins_partition_all_pairs(rng):
    # truth values spanning close, intermediate, distant and unrelated pairs
    n = 12
    vals = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    choices = rng.choice([0.6, 0.125, 0.01, 0.0003, 0.0, -0.01], size=len(iu[0]))
    vals[iu] = choices
    vals = vals + vals.T + np.eye(n)
    truth = as_matrix(vals, kind="truth")
    rows = rmse_by_degree(truth, truth)
    assert sum(count for _, _, _, count in rows) == len(iu[0])


def test_bin_gap_detected():
    truth = _truth_pair(0.125)
    bad_bins = [DegreeBin("only-close", 0.0, 1.5),
                DegreeBin("unrelated", np.inf, np.inf)]
    with pytest.raises(ValueError, match="do not cover"):
        rmse_by_degree(truth, truth, bins=bad_bins)


def test_zero_proportion():
    truth = _truth_pair(0.0625)
    zeroed = as_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    kept = as_matrix(np.array([[1.0, 0.05], [0.05, 1.0]]))
    assert {l: f for l, _, f in zero_proportion(zeroed, truth)}["4"] == 1.0
    assert {l: f for l, _, f in zero_proportion(kept, truth)}["4"] == 0.0


def test_zero_proportion_epsilon():
    truth = _truth_pair(0.0625)
    tiny = as_matrix(np.array([[1.0, 9e-6], [9e-6, 1.0]]))
    assert {l: f for l, _, f in zero_proportion(tiny, truth)}["4"] == 1.0
    assert {l: f for l, _, f in
            zero_proportion(tiny, truth, epsilon=1e-6)}["4"] == 0.0
    with pytest.raises(ValueError):
        zero_proportion(tiny, truth, epsilon=0.0)


def test_overall_rmse_manual(rng):
    n = 6
    truth = as_matrix(np.eye(n), kind="truth")
    noise = rng.standard_normal((n, n))
    est_vals = np.eye(n) + (noise + noise.T) / 2 * 0.01
    est = as_matrix(est_vals)
    iu = np.triu_indices(n, k=1)
    manual = np.sqrt(np.mean((est_vals[iu]) ** 2))
    assert overall_rmse(truth, est) == pytest.approx(manual, abs=1e-15)


def test_dimension_mismatch_rejected():
    truth = _truth_pair(0.5)
    est = as_matrix(np.eye(3))
    with pytest.raises(ValueError, match="mismatch"):
        rmse_by_degree(truth, est)


def test_evaluate_methods_collects_all():
    truth = _truth_pair(0.125)
    report = evaluate_methods(truth, {"a": truth, "b": _truth_pair(0.5)})
    methods = {m for _, m, _, _ in report["per_degree"]}
    assert methods == {"a", "b"}
    assert dict(report["overall"])["a"] == 0.0


def test_csv_outputs_parse(tmp_path):
    truth = _truth_pair(0.125)
    est = as_matrix(np.array([[1.0, 0.135], [0.135, 1.0]]))
    rmse_rows = rmse_by_degree(truth, est)
    zero_rows = zero_proportion(est, truth)
    p1 = tmp_path / "rmse.csv"
    p2 = tmp_path / "zero.csv"
    write_rmse_csv(rmse_rows, p1, header_lines=["context"])
    write_zero_csv(zero_rows, p2)
    with open(p1) as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    assert rows[0] == ["degree_bin", "method", "rmse", "pairs"]
    assert len(rows) == 1 + len(rmse_rows)
    with open(p2) as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    assert rows[0] == ["degree_bin", "method", "zero_fraction"]
