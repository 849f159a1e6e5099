"""Oracle risk and the large-sample convergence harness.

When the mixing measure is known, the posterior over allocations factorizes
into per-observation responsibilities, and the expected distance between two
localized densities has a closed form::

    Delta*_ij = sum_{m != m'} H(theta_m, theta_m') r_im r_jm'

i.e. ``R H R^T`` with the diagonal reset to zero, where ``r_im`` is the
probability that observation ``i`` came from component ``m``.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .estimators import allocation_psm, binder_estimate
from .gibbs import ChainConfig, GaussianKernel, GmmPrior, check_data, run_gibbs
from .hellinger import estimate_delta, kernel_distance_matrix
from .optimize import GreedyConfig, average_linkage_path, path_losses, point_estimate
from .partitions import LossParams, adjusted_rand_index, canonicalize
from .risk import fold_loss
from .tuning import omega_avg


@dataclass(frozen=True)
class OracleMixture:
    weights: np.ndarray
    kernels: Tuple[GaussianKernel, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size != len(self.kernels) or w.size == 0:
            raise ValueError("need one weight per kernel")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must lie on the simplex")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kernels", tuple(self.kernels))

    @classmethod
    def from_arrays(cls, weights, means, covs):
        return cls(weights, tuple(GaussianKernel(np.asarray(m, float), np.asarray(c, float))
                                  for m, c in zip(means, covs)))

    @property
    def m(self):
        return self.weights.size

    @property
    def means(self):
        return np.array([g.mean for g in self.kernels])

    @property
    def chols(self):
        return np.array([np.linalg.cholesky(g.cov) for g in self.kernels])

    def kernel_distances(self):
        return kernel_distance_matrix(self.means, self.chols)


def responsibilities(x, oracle):
    """``(n, M)`` matrix of ``P(s_i = m | x_i, oracle)``."""
    x = check_data(x)
    with np.errstate(divide="ignore", over="ignore"):
        logw = np.log(oracle.weights)
        logp = np.column_stack([g.logpdf(x) for g in oracle.kernels]) + logw[None, :]
    norm = logsumexp(logp, axis=1)
    if not np.all(np.isfinite(norm)):
        bad = int(np.flatnonzero(~np.isfinite(norm))[0])
        raise FloatingPointError("oracle density vanishes at observation %d" % bad)
    return np.exp(logp - norm[:, None])


def oracle_allocation_probs(x, oracle, i, j):
    """Symmetrized joint allocation probabilities for a pair of observations.

    Entry ``(m, m')`` with ``m < m'`` is ``r_im r_jm' + r_im' r_jm``; all other
    entries are zero, so the total is the probability that ``i`` and ``j``
    come from different components.
    """
    r = responsibilities(np.asarray(x)[[i, j]], oracle)
    joint = np.outer(r[0], r[1])
    return np.triu(joint + joint.T, 1)


def oracle_delta(x, oracle):
    r = responsibilities(x, oracle)
    d = r @ oracle.kernel_distances() @ r.T
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 1.0)


def oracle_coclustering(x, oracle):
    """``P(s_i = s_j | oracle)`` with unit diagonal."""
    r = responsibilities(x, oracle)
    p = r @ r.T
    np.fill_diagonal(p, 1.0)
    return np.clip(p, 0.0, 1.0)


def oracle_risk(labels, x, oracle, params):
    return fold_loss(labels, oracle_delta(x, oracle), params)


@dataclass(frozen=True)
class RuleCheck:
    rule: Optional[str]             # "match", "merge" or None
    predicted: Optional[np.ndarray]


def oracle_rules_check(oracle, x, params, tol=1e-6):
    """Which limiting oracle rule applies, and the clustering it predicts.

    * ``match``: every pair of kernels is at distance 1 (within ``tol``); each
      observation goes to its most probable component.
    * ``merge``: exactly two kernels, closer than ``gamma``; one cluster.
    """
    gamma = params.gamma if isinstance(params, LossParams) else LossParams(params).gamma
    h = oracle.kernel_distances()
    iu = np.triu_indices(oracle.m, 1)
    x = check_data(x)
    if oracle.m >= 2 and np.all(h[iu] >= 1.0 - tol):
        return RuleCheck("match", canonicalize(np.argmax(responsibilities(x, oracle), axis=1)))
    if oracle.m == 2 and h[0, 1] < gamma:
        return RuleCheck("merge", np.zeros(x.shape[0], dtype=np.intp))
    return RuleCheck(None, None)


# ---------------------------------------------------------------------------
# convergence harness

WELL_MEANS = ((1.0, 1.0), (1.75, 1.75), (-1.75, -1.75), (-1.0, -1.0))


def four_wells_oracle():
    """Equal-weight mixture of four bivariate Gaussians with covariance I/4."""
    cov = 0.25 * np.eye(2)
    return OracleMixture.from_arrays(np.full(4, 0.25), WELL_MEANS, [cov] * 4)


@dataclass(frozen=True)
class ConvergenceConfig:
    n_grid: Sequence[int] = (50, 100, 500, 1000)
    seeds: Sequence[int] = (0, 1, 2)
    chain: ChainConfig = ChainConfig(iterations=9000, burn_in=1000, thin=3)
    greedy: GreedyConfig = GreedyConfig(restarts=8)
    max_candidates: int = 20
    oracle: OracleMixture = field(default_factory=four_wells_oracle)

    def prior(self):
        p = self.oracle.kernels[0].dim
        return GmmPrior.location(self.oracle.kernels[0].cov, k=self.oracle.m,
                                 alpha=1.0 / self.oracle.m, mu=np.zeros(p), loc_cov=np.eye(p))


@dataclass
class ConvergenceRun:
    n: int
    seed: int
    candidate_k: np.ndarray
    risk: np.ndarray
    oracle_risk: np.ndarray
    ari_fold_vs_oracle: float
    k_fold: int
    k_oracle: int
    k_binder: int
    k_oracle_binder: int

    @property
    def gap(self):
        pairs = self.n * (self.n - 1) / 2.0
        return np.abs(self.risk - self.oracle_risk) / pairs

    @property
    def mean_gap(self):
        return float(self.gap.mean())


def sample_oracle(oracle, n, rng):
    counts = rng.multinomial(n, oracle.weights)
    labels = np.repeat(np.arange(oracle.m), counts)
    rng.shuffle(labels)
    x = np.empty((n, oracle.means.shape[1]))
    for m, g in enumerate(oracle.kernels):
        idx = np.flatnonzero(labels == m)
        x[idx] = rng.multivariate_normal(g.mean, g.cov, size=idx.size)
    return x, labels


def convergence_run(n, seed, cfg=ConvergenceConfig()):
    """One replicate of the oracle comparison at sample size ``n``."""
    ss = np.random.SeedSequence([seed, n])
    data_seed, chain_seed, opt_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    x, _ = sample_oracle(cfg.oracle, n, np.random.default_rng(data_seed))
    chain = ChainConfig(cfg.chain.iterations, cfg.chain.burn_in, cfg.chain.thin, chain_seed)
    samples = run_gibbs(x, cfg.prior(), chain)
    greedy = GreedyConfig(cfg.greedy.restarts, cfg.greedy.max_sweeps, opt_seed, cfg.greedy.max_zealous)

    delta = estimate_delta(samples)
    delta_star = oracle_delta(x, cfg.oracle)
    params = omega_avg(delta)
    params_star = omega_avg(delta_star)
    c_fold = point_estimate(delta, params, greedy).labels
    c_oracle = point_estimate(delta_star, params_star, greedy).labels

    # risks of the path candidates, both under the oracle's omega
    path = average_linkage_path(delta)
    levels = np.arange(len(path) - 1, max(len(path) - 1 - cfg.max_candidates, -1), -1)
    risk = path_losses(path, delta, params_star)[levels]
    risk_star = path_losses(path, delta_star, params_star)[levels]

    c_binder = binder_estimate(allocation_psm(samples), greedy)
    c_binder_star = binder_estimate(oracle_coclustering(x, cfg.oracle), greedy)
    return ConvergenceRun(
        n=n, seed=seed, candidate_k=len(path) - levels, risk=risk, oracle_risk=risk_star,
        ari_fold_vs_oracle=adjusted_rand_index(c_fold, c_oracle),
        k_fold=int(c_fold.max()) + 1, k_oracle=int(c_oracle.max()) + 1,
        k_binder=int(c_binder.max()) + 1, k_oracle_binder=int(c_binder_star.max()) + 1)


def validate_convergence(cfg=ConvergenceConfig(), progress=None):
    """Run every ``(n, seed)`` combination; results ordered by ``(n, seed)``."""
    runs = []
    for n in sorted(cfg.n_grid):
        for seed in sorted(cfg.seeds):
            runs.append(convergence_run(n, seed, cfg))
            if progress is not None:
                progress(runs[-1])
    return runs


REPORT_COLUMNS = ["n", "seed", "candidate_k", "risk", "oracle_risk", "gap", "ari_fold_vs_oracle",
                  "k_fold", "k_oracle", "k_binder", "k_oracle_binder"]


def write_convergence_csv(path, runs):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_COLUMNS)
        for run in runs:
            for k, r, rs, g in zip(run.candidate_k, run.risk, run.oracle_risk, run.gap):
                out.writerow([run.n, run.seed, int(k), repr(float(r)), repr(float(rs)), repr(float(g)),
                              repr(run.ari_fold_vs_oracle), run.k_fold, run.k_oracle,
                              run.k_binder, run.k_oracle_binder])


def summarize_convergence(runs):
    """Per-``n`` means of the ARI between estimate and oracle and of the risk gap."""
    out = {}
    for n in sorted({r.n for r in runs}):
        sel = [r for r in runs if r.n == n]
        out[n] = {"ari": float(np.mean([r.ari_fold_vs_oracle for r in sel])),
                  "gap": float(np.mean([r.mean_gap for r in sel])),
                  "k_fold": float(np.mean([r.k_fold for r in sel])),
                  "k_oracle": float(np.mean([r.k_oracle for r in sel]))}
    return out
