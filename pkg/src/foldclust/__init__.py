"""Bayesian clustering by fusing the overfitted kernels of a Gaussian mixture.

Typical use::

    samples = run_gibbs(x, GmmPrior.default(p), ChainConfig())
    delta = estimate_delta(samples)
    estimate = point_estimate(delta, omega_avg(delta))
"""

__version__ = "0.1.0"

from .estimators import allocation_psm, binder_estimate, expected_vi, vi_estimate
from .gibbs import (ChainConfig, DegenerateChainError, GaussianKernel, GmmPrior, MixtureDraw,
                    PosteriorSamples, load_draws, localized_params, run_gibbs, save_draws)
from .hellinger import (allocation_split_frequency, check_delta, estimate_delta, hellinger_gaussian,
                        kernel_distance_matrix, per_draw_distance_matrix, read_delta_bin, read_delta_csv,
                        write_delta_bin, write_delta_csv)
from .optimize import (CandidatePath, GreedyConfig, PointEstimate, average_linkage_path, best_on_path,
                       exhaustive_minimize, greedy_minimize, path_losses, point_estimate, weighted_loss)
from .oracle import (ConvergenceConfig, OracleMixture, oracle_allocation_probs, oracle_delta,
                     oracle_rules_check, validate_convergence)
from .partitions import (LossParams, adjusted_rand_index, binder_distance, canonicalize,
                         coclustering_matrix, merge_clusters, vi_distance)
from .risk import RiskReport, binder_decomposition, fold_loss, merge_gain, risk_report, should_merge
from .simulate import (LabeledDataset, SkewGaussianParams, gen_gaussian_mixture, gen_moons,
                       gen_skew_gaussian_mixture, gen_skew_symmetric_mixture, gen_spirals, generate)
from .tuning import DegenerateDistanceError, ElbowPoint, elbow_curve, omega_avg
from .uq import CredibleBall, credible_ball, fold_psm, per_draw_minimizers
