"""Command-line interface composing the library into reproducible pipelines."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .evalreport import evaluate_methods, write_rmse_csv, write_zero_csv
from .grm import estimate_grm, read_grm, save_pedigree, write_grm
from .panel import estimate_allele_freqs, load_genotypes, save_genotypes, scale_genotypes
from .pedsim import PoolParams, SimulationSpec, simulate_panel, simulate_phenotype
from .reml import (fit_variance_components, load_phenotype, profile_lambda,
                   save_phenotype, write_fit_csv)
from .smoothing import psd_repair, simple_threshold, smooth_covariance
from .treelet import TreeletDecomposition, build_treelet
from .tuning import SubsampleConfig, select_lambda, write_tuning_csv

PRESETS = {
    # scaled-down bundle: finishes in minutes while keeping the structure of
    # the full design.  The marker count and tuning split are calibrated so
    # the per-entry noise of the relationship estimate sits below the R=4
    # relationship signal, the regime in which basis smoothing is informative.
    "desk": {
        "spec": SimulationSpec(n_families=20, family_size=10, rng_seed=0,
                               sampling_bias=1.2,
                               pool=PoolParams(n_snps=30000, n_chromosomes=20,
                                               mean_block_len=1.0)),
        "tuning": dict(train_snps=5000, blackout=2, test_size=50,
                       test_subsamples=20, repeats=3),
    },
    "paper": {
        "spec": SimulationSpec(n_families=100, family_size=10, rng_seed=0,
                               pool=PoolParams(n_snps=100000, n_chromosomes=22)),
        "tuning": dict(train_snps=5000, blackout=10, test_size=50,
                       test_subsamples=50, repeats=10),
    },
}


def _header(args, extra=()):
    lines = [f"tcskin {__version__}", f"seed {getattr(args, 'seed', 'n/a')}"]
    lines.extend(extra)
    return lines


def _load_scaled(path, maf_min):
    fmt = "binary" if path.endswith(".bin") else "text"
    panel = load_genotypes(path, format=fmt)
    return panel, scale_genotypes(estimate_allele_freqs(panel), maf_min=maf_min)


def _cmd_simulate(args):
    preset = PRESETS[args.preset]
    spec = replace(preset["spec"], rng_seed=args.seed, h2_true=args.h2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth, ped = simulate_panel(spec)
    save_genotypes(panel, out / "panel.txt", format="text")
    write_grm(truth, out / "truth")
    save_pedigree(ped, out / "pedigree.txt")
    scaled = scale_genotypes(estimate_allele_freqs(panel), maf_min=args.maf)
    rng = np.random.default_rng(np.random.SeedSequence(spec.rng_seed).spawn(1)[0])
    pheno, _ = simulate_phenotype(scaled, spec, rng=rng)
    save_phenotype(pheno, out / "phenotype.txt")
    return 0


def _cmd_grm(args):
    _, scaled = _load_scaled(args.infile, args.maf)
    write_grm(estimate_grm(scaled), args.out)
    return 0


def _cmd_treelet(args):
    matrix = read_grm(args.grm)
    decomp = build_treelet(matrix, levels=args.levels, similarity=args.similarity)
    decomp.to_json(args.out)
    return 0


def _cmd_smooth(args):
    matrix = read_grm(args.grm)
    if args.decomp:
        decomp = TreeletDecomposition.from_json(args.decomp, matrix=matrix)
        sm = smooth_covariance(matrix, decomp, args.threshold)
    elif args.simple:
        sm = simple_threshold(matrix, args.threshold)
    else:
        decomp = build_treelet(matrix)
        sm = smooth_covariance(matrix, decomp, args.threshold)
    if args.psd_repair:
        sm = psd_repair(sm)
    write_grm(sm.values, args.out)
    return 0


def _tuning_config(args):
    grid = None
    if args.grid:
        grid = np.array([float(x) for x in args.grid.split(",")])
    return SubsampleConfig(train_snps=args.M, blackout=args.b,
                           blackout_unit=args.b_unit, test_size=args.k,
                           test_subsamples=args.L, repeats=args.repeats,
                           lambda_grid=grid, maf_min=args.maf,
                           rng_seed=args.seed, basis=args.basis)


def _cmd_tune(args):
    panel = load_genotypes(args.infile,
                           format="binary" if args.infile.endswith(".bin") else "text")
    result = select_lambda(panel, _tuning_config(args))
    write_tuning_csv(result, args.out, header_lines=_header(args))
    print(f"lambda_hat {result.lambda_hat!r}")
    return 0


def _cmd_reml(args):
    matrix = read_grm(args.grm)
    pheno = load_phenotype(args.pheno)
    vc = fit_variance_components(pheno, matrix)
    write_fit_csv([(0.0, -2.0 * vc.reml_loglik, vc.h2, vc.sigma_g2, vc.sigma_e2,
                    vc.converged)], args.out, header_lines=_header(args))
    print(f"h2 {vc.h2!r} sigma_g2 {vc.sigma_g2!r} sigma_e2 {vc.sigma_e2!r}")
    return 0


def _cmd_profile(args):
    matrix = read_grm(args.grm)
    pheno = load_phenotype(args.pheno)
    if args.decomp:
        decomp = TreeletDecomposition.from_json(args.decomp, matrix=matrix)
    else:
        decomp = build_treelet(matrix)
    grid = np.array([float(x) for x in args.grid.split(",")])
    lam_star, vc, curve = profile_lambda(pheno, matrix, decomp, grid)
    write_fit_csv(curve, args.out,
                  header_lines=_header(args, [f"lambda_star {lam_star!r}"]))
    print(f"lambda_star {lam_star!r} h2 {vc.h2!r}")
    return 0


def _cmd_eval(args):
    truth = read_grm(args.truth, kind="truth")
    estimates = {}
    for item in args.estimate:
        name, stem = item.split("=", 1)
        estimates[name] = read_grm(stem)
    report = evaluate_methods(truth, estimates, epsilon=args.epsilon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(args)
    write_rmse_csv(report["per_degree"], out / "rmse_by_degree.csv", header)
    write_zero_csv(report["zero_proportions"], out / "zero_proportion.csv", header)
    for method, rmse in report["overall"]:
        print(f"overall_rmse {method} {rmse!r}")
    return 0


def _cmd_pipeline(args):
    """simulate -> grm -> tune -> smooth -> reml -> eval in one run."""
    preset = PRESETS[args.preset]
    spec = replace(preset["spec"], rng_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    panel, truth, ped = simulate_panel(spec)
    save_genotypes(panel, out / "panel.txt", format="text")
    write_grm(truth, out / "truth")
    save_pedigree(ped, out / "pedigree.txt")

    scaled = scale_genotypes(estimate_allele_freqs(panel), maf_min=args.maf)
    a_hat = estimate_grm(scaled)
    write_grm(a_hat, out / "raw")

    config = SubsampleConfig(maf_min=args.maf, rng_seed=args.seed,
                             **preset["tuning"])
    result = select_lambda(panel, config)
    write_tuning_csv(result, out / "tuning.csv", header_lines=_header(args))

    decomp = build_treelet(a_hat)
    sm = smooth_covariance(a_hat, decomp, result.lambda_hat)
    write_grm(sm.values, out / "smoothed")

    simple_cfg = replace(config, basis="dirac")
    simple_result = select_lambda(panel, simple_cfg)
    sm_simple = simple_threshold(a_hat, simple_result.lambda_hat)
    write_grm(sm_simple.values, out / "simple")

    rng = np.random.default_rng(np.random.SeedSequence(spec.rng_seed).spawn(1)[0])
    pheno, _ = simulate_phenotype(scaled, spec, rng=rng)
    save_phenotype(pheno, out / "phenotype.txt")
    rows = []
    for lam, label in [(0.0, "raw"), (result.lambda_hat, "tcs")]:
        matrix = a_hat if lam == 0.0 else sm.values
        vc = fit_variance_components(pheno, matrix)
        rows.append((lam, -2.0 * vc.reml_loglik, vc.h2, vc.sigma_g2,
                     vc.sigma_e2, vc.converged))
    write_fit_csv(rows, out / "reml.csv", header_lines=_header(args))

    report = evaluate_methods(truth, {"raw": a_hat, "tcs": sm.values,
                                      "simple": sm_simple.values})
    header = _header(args, [f"lambda_hat {result.lambda_hat!r}",
                            f"lambda_hat_simple {simple_result.lambda_hat!r}"])
    write_rmse_csv(report["per_degree"], out / "rmse_by_degree.csv", header)
    write_zero_csv(report["zero_proportions"], out / "zero_proportion.csv", header)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcskin",
        description="Genetic relationship matrices, treelet covariance "
                    "smoothing and REML heritability.")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("TCSKIN_THREADS", 0)) or None,
                        help="cap internal BLAS parallelism")
    parser.add_argument("--deterministic", action="store_true",
                        help="accepted for compatibility; outputs carry no timestamps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic panel with known truth")
    p.add_argument("--preset", choices=PRESETS, default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h2", type=float, default=0.5)
    p.add_argument("--maf", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("grm", help="estimate a relationship matrix from genotypes")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--maf", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output stem for .grm.bin/.grm.id")
    p.set_defaults(func=_cmd_grm)

    p = sub.add_parser("treelet", help="build and serialize a treelet decomposition")
    p.add_argument("--grm", required=True)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--similarity", choices=["correlation", "covariance"],
                   default="correlation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_treelet)

    p = sub.add_parser("smooth", help="threshold a matrix in a treelet basis")
    p.add_argument("--grm", required=True)
    p.add_argument("--decomp", default=None)
    p.add_argument("--lambda", dest="threshold", type=float, required=True)
    p.add_argument("--simple", action="store_true",
                   help="simple thresholding (Dirac basis)")
    p.add_argument("--psd-repair", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("tune", help="select the smoothing parameter by SNP subsampling")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--b-unit", choices=["snp", "bp"], default="snp")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--L", type=int, default=20)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--grid", default=None, help="comma-separated lambda values")
    p.add_argument("--maf", type=float, default=0.05)
    p.add_argument("--basis", choices=["treelet", "dirac"], default="treelet")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("reml", help="fit variance components and heritability")
    p.add_argument("--grm", required=True)
    p.add_argument("--pheno", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_reml)

    p = sub.add_parser("profile", help="select lambda by profile likelihood")
    p.add_argument("--grm", required=True)
    p.add_argument("--pheno", required=True)
    p.add_argument("--decomp", default=None)
    p.add_argument("--grid", required=True, help="comma-separated lambda values")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("eval", help="RMSE and zeroing reports against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", action="append", required=True,
                   metavar="NAME=STEM")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline",
                       help="simulate, estimate, tune, smooth, fit and evaluate")
    p.add_argument("--preset", choices=PRESETS, default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maf", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"tcskin: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
