"""The pairwise fusing loss, its posterior risk, and the merge criterion.

For a clustering ``c`` and a matrix ``D`` of distances in ``[0, 1]``::

    L(c) = sum_{i<j} [c_i == c_j] * D_ij + omega * [c_i != c_j] * (1 - D_ij)

With ``D`` the distances of one posterior draw this is the loss of that draw;
with ``D`` the posterior expected distance matrix it is the posterior risk,
by linearity of expectation.  Both therefore share :func:`fold_loss`.
"""

from dataclasses import dataclass

import numpy as np

from .hellinger import kernel_distance_matrix
from .partitions import LossParams, canonicalize, merge_clusters


def _omega(params):
    return params.omega if isinstance(params, LossParams) else float(params)


@dataclass(frozen=True)
class RiskReport:
    risk: float
    n_pairs: int
    omega: float

    @property
    def normalized(self):
        return self.risk / self.n_pairs if self.n_pairs else 0.0


def fold_loss(labels, dmat, params):
    """Loss (or risk, when ``dmat`` is a posterior mean) of a clustering.

    Parameters
    ----------
    labels : (n,) int array
    dmat : (n, n) array of pairwise distances
    params : LossParams or float
        ``omega``.

    Returns
    -------
    float
    """
    labels = np.asarray(labels)
    dmat = np.asarray(dmat, dtype=np.float64)
    if dmat.shape != (labels.size, labels.size):
        raise ValueError("distance matrix shape %s does not match %d labels" % (dmat.shape, labels.size))
    omega = _omega(params)
    iu = np.triu_indices(labels.size, 1)
    d = dmat[iu]
    same = labels[iu[0]] == labels[iu[1]]
    return float(np.sum(np.where(same, d, omega * (1.0 - d))))


def risk_report(labels, dmat, params):
    n = np.asarray(labels).size
    return RiskReport(fold_loss(labels, dmat, params), n * (n - 1) // 2, _omega(params))


def merge_gain(labels, h1, h2, dmat, params):
    """Loss decrease obtained by fusing clusters ``h1`` and ``h2``.

    Equals ``omega * sum(1 - D) - sum(D)`` over cross pairs; positive exactly
    when the mean cross-cluster distance is below ``gamma``.
    """
    labels = np.asarray(labels)
    if h1 == h2:
        raise ValueError("h1 and h2 must differ")
    a = labels == h1
    b = labels == h2
    if not a.any() or not b.any():
        raise ValueError("unknown cluster id")
    omega = _omega(params)
    cross = np.asarray(dmat, dtype=np.float64)[np.ix_(a, b)]
    return float(omega * np.sum(1.0 - cross) - np.sum(cross))


def mean_cross_distance(labels, h1, h2, dmat):
    labels = np.asarray(labels)
    return float(np.asarray(dmat)[np.ix_(labels == h1, labels == h2)].mean())


def should_merge(labels, h1, h2, dmat, params):
    """Strict merge criterion: mean cross distance below ``gamma``.  Ties do not merge."""
    gamma = params.gamma if isinstance(params, LossParams) else LossParams(params).gamma
    return mean_cross_distance(labels, h1, h2, dmat) < gamma


def merged(labels, h1, h2):
    return merge_clusters(labels, h1, h2)


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.float64)
    return counts * (counts - 1.0) / 2.0


def binder_decomposition(labels, draw, params):
    """Split the loss of one draw into Binder's loss and a kernel-overlap remainder.

    Uses the contingency table ``n_hk`` between ``labels`` and the draw's
    allocations together with the kernel distances ``eta_kk'``::

        binder = sum_h C(n_h., 2) + omega sum_k C(n_.k, 2) - (1 + omega) sum_hk C(n_hk, 2)
        B      = omega sum_{k<k'} n_.k n_.k' (1 - eta_kk')
                 - (1 + omega) sum_h sum_{k<k'} n_hk n_hk' (1 - eta_kk')

    Returns
    -------
    (binder_part, b_part) : tuple of float
    """
    omega = _omega(params)
    labels = canonicalize(labels)
    alloc = np.asarray(draw.alloc)
    used = np.unique(alloc)
    # restrict to occupied components; empty ones contribute nothing
    eta = kernel_distance_matrix(draw.means, draw.chols)[np.ix_(used, used)]
    table = np.zeros((labels.max() + 1, used.size))
    np.add.at(table, (labels, np.searchsorted(used, alloc)), 1.0)
    n_h = table.sum(axis=1)
    n_k = table.sum(axis=0)
    binder = _pairs(n_h).sum() + omega * _pairs(n_k).sum() - (1.0 + omega) * _pairs(table).sum()
    overlap = np.triu(1.0 - eta, 1)
    b_total = omega * float(n_k @ overlap @ n_k)
    b_within = float(np.einsum("hk,kl,hl->", table, overlap, table))
    return float(binder), b_total - (1.0 + omega) * b_within
