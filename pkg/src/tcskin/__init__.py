"""tcskin: genetic relationship matrices, treelet covariance smoothing,
subsampling/profile-likelihood tuning and REML heritability, with a built-in
pedigree simulator for validation against known ground truth."""

__version__ = "0.1.0"

from .estimators import HeritabilityREML, TreeletCovarianceSmoother
from .evalreport import evaluate_methods, overall_rmse, rmse_by_degree, zero_proportion
from .grm import (Pedigree, RelationshipMatrix, degree_of_relationship,
                  estimate_grm, load_pedigree, pedigree_expected_relationship,
                  read_grm, restrict, save_pedigree, write_grm)
from .panel import (GenotypePanel, ScaledPanel, SnpMeta, estimate_allele_freqs,
                    load_genotypes, save_genotypes, scale_genotypes)
from .pedsim import (HaplotypePool, PoolParams, SimulationSpec, drop_genomes,
                     generate_founders, simulate_panel, simulate_phenotype)
from .reml import (PhenotypeVector, VarianceComponents, fit_variance_components,
                   load_phenotype, profile_lambda, reml_loglik, save_phenotype)
from .smoothing import (SmoothedMatrix, psd_repair, simple_threshold,
                        smooth_covariance, threshold_entries)
from .treelet import (TreeletDecomposition, build_treelet, identity_decomposition,
                      jacobi_pair_rotation, pca_decomposition, transform_covariance)
from .tuning import (SubsampleConfig, TuningResult, sample_blackout,
                     select_lambda, split_chromosomes, treelet_weights,
                     weighted_risk)
