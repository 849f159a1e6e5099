"""Competing point estimates computed from the allocation labels alone.

Both reduce the draws to co-clustering information about the component
allocations ``s`` and ignore the fitted kernels.
"""

import numpy as np

from .optimize import GreedyConfig, average_linkage_path, point_estimate
from .partitions import LossParams, canonicalize


def allocation_psm(samples):
    """``P(s_i = s_j | X)`` estimated by the fraction of draws sharing a component."""
    n, k = samples.n, samples.k
    acc = np.zeros((n, n))
    for alloc in samples.alloc:
        onehot = np.zeros((n, k))
        onehot[np.arange(n), alloc] = 1.0
        acc += onehot @ onehot.T
    return acc / samples.t


def binder_estimate(psm, cfg=GreedyConfig()):
    """Minimizer of the posterior expected Binder loss (unit costs).

    The expected loss of ``c`` is ``sum_{i<j} [c_i = c_j](1 - p_ij) + [c_i != c_j] p_ij``,
    which is the fusing loss on ``1 - psm`` with ``omega = 1``.
    """
    d = 1.0 - np.asarray(psm, dtype=np.float64)
    np.fill_diagonal(d, 0.0)
    return point_estimate(d, LossParams(1.0), cfg).labels


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log2(p)))


def expected_vi(labels, allocs):
    """Average variation of information (bits) between ``labels`` and each row of ``allocs``."""
    labels = canonicalize(labels)
    allocs = np.asarray(allocs)
    n = labels.size
    kc = int(labels.max()) + 1
    h_c = _entropy(np.bincount(labels), n)
    total = 0.0
    for s in allocs:
        s = canonicalize(s)
        ks = int(s.max()) + 1
        joint = np.bincount(labels * ks + s, minlength=kc * ks)
        total += 2.0 * _entropy(joint, n) - h_c - _entropy(np.bincount(s), n)
    return total / len(allocs)


def vi_estimate(samples, max_k=None, max_draws=1000):
    """Approximate minimizer of the posterior expected VI.

    Candidates are the levels of the average-linkage tree on ``1 - PSM`` with
    at most ``max_k`` clusters (default: the number of mixture components);
    the candidate with the smallest expected VI over (at most ``max_draws``
    evenly spaced) draws is returned.
    """
    psm = allocation_psm(samples)
    d = 1.0 - psm
    np.fill_diagonal(d, 0.0)
    path = average_linkage_path(d)
    max_k = samples.k if max_k is None else max_k
    step = max(1, samples.t // max_draws)
    allocs = samples.alloc[::step]
    best, best_val = None, np.inf
    for level in range(len(path) - 1, max(len(path) - 1 - max_k, -1), -1):
        val = expected_vi(path.labels[level], allocs)
        if val < best_val - 1e-12:
            best, best_val = path.labels[level].copy(), val
    return best
