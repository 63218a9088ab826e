"""Command-line interface: subcommand round-trips, determinism, exit codes."""

import csv

import numpy as np
import pytest

from tcskin import (PoolParams, SimulationSpec, estimate_allele_freqs,
                    estimate_grm, read_grm, save_genotypes, scale_genotypes,
                    simulate_panel, simulate_phenotype)
from tcskin.cli import cli_dispatch
from tcskin.reml import save_phenotype


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small simulated panel with its raw estimate, truth and phenotype on disk."""
    root = tmp_path_factory.mktemp("cliws")
    spec = SimulationSpec(n_families=4, family_size=6, rng_seed=2,
                          pool=PoolParams(n_snps=1200, n_chromosomes=8,
                                          mean_block_len=1.0))
    panel, truth, ped = simulate_panel(spec)
    save_genotypes(panel, root / "panel.txt", format="text")
    scaled = scale_genotypes(estimate_allele_freqs(panel))
    a_hat = estimate_grm(scaled)
    from tcskin import write_grm
    write_grm(a_hat, root / "raw")
    write_grm(truth, root / "truth")
    pheno, _ = simulate_phenotype(scaled, spec, rng=np.random.default_rng(2))
    save_phenotype(pheno, root / "phenotype.txt")
    return root


def test_grm_subcommand_matches_library(workspace, tmp_path):
    rc = cli_dispatch(["grm", "--in", str(workspace / "panel.txt"),
                       "--out", str(tmp_path / "cli_raw")])
    assert rc == 0
    via_cli = read_grm(tmp_path / "cli_raw")
    direct = read_grm(workspace / "raw")
    assert np.array_equal(via_cli.values, direct.values)
    assert via_cli.sample_ids == direct.sample_ids


def test_smooth_zero_lambda_is_identity(workspace, tmp_path):
    rc = cli_dispatch(["smooth", "--grm", str(workspace / "raw"),
                       "--lambda", "0", "--out", str(tmp_path / "sm")])
    assert rc == 0
    raw = read_grm(workspace / "raw")
    sm = read_grm(tmp_path / "sm")
    assert np.abs(sm.values - raw.values).max() < 1e-6  # float32 storage


def test_treelet_then_smooth_roundtrip(workspace, tmp_path):
    decomp_path = tmp_path / "decomp.json"
    assert cli_dispatch(["treelet", "--grm", str(workspace / "raw"),
                         "--out", str(decomp_path)]) == 0
    assert cli_dispatch(["smooth", "--grm", str(workspace / "raw"),
                         "--decomp", str(decomp_path), "--lambda", "0.1",
                         "--out", str(tmp_path / "sm")]) == 0
    direct = tmp_path / "sm_direct"
    assert cli_dispatch(["smooth", "--grm", str(workspace / "raw"),
                         "--lambda", "0.1", "--out", str(direct)]) == 0
    assert np.array_equal(read_grm(tmp_path / "sm").values,
                          read_grm(direct).values)


def test_simple_smoothing_flag(workspace, tmp_path):
    assert cli_dispatch(["smooth", "--grm", str(workspace / "raw"),
                         "--lambda", "0.2", "--simple",
                         "--out", str(tmp_path / "sm")]) == 0
    raw = read_grm(workspace / "raw")
    sm = read_grm(tmp_path / "sm")
    below = np.abs(raw.values) < 0.2
    assert below.any()
    assert (sm.values[below] == 0).all()
    assert np.array_equal(sm.values[~below],
                          raw.values[~below].astype("<f4").astype(float))


def test_tune_subcommand_is_byte_reproducible(workspace, tmp_path):
    args = ["tune", "--in", str(workspace / "panel.txt"), "--M", "150",
            "--b", "2", "--k", "40", "--L", "3", "--repeats", "1",
            "--seed", "4"]
    out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert cli_dispatch(args + ["--out", str(out1)]) == 0
    assert cli_dispatch(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_reml_subcommand(workspace, tmp_path):
    out = tmp_path / "reml.csv"
    assert cli_dispatch(["reml", "--grm", str(workspace / "raw"),
                         "--pheno", str(workspace / "phenotype.txt"),
                         "--out", str(out)]) == 0
    with open(out) as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    assert rows[0][:3] == ["lambda", "neg2loglik", "h2"]
    h2 = float(rows[1][2])
    assert 0.0 <= h2 <= 1.0


def test_profile_subcommand(workspace, tmp_path):
    out = tmp_path / "profile.csv"
    assert cli_dispatch(["profile", "--grm", str(workspace / "raw"),
                         "--pheno", str(workspace / "phenotype.txt"),
                         "--grid", "0,0.05,0.1", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    assert len(rows) == 4  # header + one row per grid point


def test_eval_subcommand(workspace, tmp_path):
    out = tmp_path / "eval"
    assert cli_dispatch(["eval", "--truth", str(workspace / "truth"),
                         "--estimate", f"raw={workspace / 'raw'}",
                         "--out", str(out)]) == 0
    assert (out / "rmse_by_degree.csv").exists()
    assert (out / "zero_proportion.csv").exists()


def test_usage_error_exit_code():
    assert cli_dispatch(["smooth", "--grm", "x"]) == 2  # missing required flags
    assert cli_dispatch(["not-a-command"]) == 2


def test_runtime_error_exit_code(tmp_path):
    rc = cli_dispatch(["grm", "--in", str(tmp_path / "missing.txt"),
                       "--out", str(tmp_path / "o")])
    assert rc == 1


def test_simulate_writes_expected_files(tmp_path):
    out = tmp_path / "sim"
    assert cli_dispatch(["simulate", "--preset", "desk", "--seed", "1",
                         "--out", str(out)]) == 0
    for name in ("panel.txt", "panel.txt.snps", "pedigree.txt",
                 "phenotype.txt", "truth.grm.bin", "truth.grm.id"):
        assert (out / name).exists()
