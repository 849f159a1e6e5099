"""Partition algebra and partition metrics.

Clusterings are plain integer arrays of length ``n``.  Functions that need a
canonical form call :func:`canonicalize`, which renumbers cluster ids densely
in order of first occurrence, so ``[5, 5, 2, 5, 2]`` becomes ``[0, 0, 1, 0, 1]``.

Pair-counting quantities always sum over unordered pairs ``i < j``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossParams:
    """Loss parameter ``omega`` and the induced merge threshold ``gamma``.

    ``gamma = omega / (1 + omega)``: two clusters are worth merging exactly
    when their mean cross-cluster distance is below ``gamma``.
    """

    omega: float

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError("omega must be a positive finite number, got %r" % (self.omega,))

    @property
    def gamma(self):
        return self.omega / (1.0 + self.omega)

    @classmethod
    def from_gamma(cls, gamma):
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1), got %r" % (gamma,))
        return cls(gamma / (1.0 - gamma))


def canonicalize(labels):
    """Relabel cluster ids as 0, 1, ... in order of first occurrence."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a nonempty 1-d array")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    # rank of each unique value by where it first appears
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].astype(np.intp)


def n_clusters(labels):
    return int(np.unique(np.asarray(labels)).size)


def coclustering_matrix(labels):
    """Boolean ``n x n`` matrix with entry ``(i, j)`` true iff i and j share a cluster."""
    labels = np.asarray(labels)
    return labels[:, None] == labels[None, :]


def merge_clusters(labels, h1, h2):
    """Return the canonical clustering obtained by fusing clusters ``h1`` and ``h2``."""
    labels = np.asarray(labels)
    if h1 == h2:
        raise ValueError("cannot merge a cluster with itself")
    if not (np.any(labels == h1) and np.any(labels == h2)):
        raise ValueError("unknown cluster id")
    out = labels.copy()
    out[out == h2] = h1
    return canonicalize(out)


def contingency_table(c1, c2):
    """Dense contingency table ``n_hk`` between two clusterings."""
    c1, c2 = _check_pair(c1, c2)
    a = canonicalize(c1)
    b = canonicalize(c2)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def _check_pair(c1, c2):
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    if c1.shape != c2.shape or c1.ndim != 1:
        raise ValueError("clusterings must be 1-d arrays of equal length, got shapes %s and %s"
                         % (c1.shape, c2.shape))
    return c1, c2


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.float64)
    return float(np.sum(counts * (counts - 1.0)) / 2.0)


def binder_distance(c1, c2, omega=1.0):
    r"""Binder loss of estimate ``c1`` against reference ``c2``.

    Counts, over pairs ``i < j``, one unit for every pair joined in ``c1`` but
    split in ``c2`` and ``omega`` units for every pair split in ``c1`` but
    joined in ``c2``.  Symmetric only when ``omega == 1``.
    """
    table = contingency_table(c1, c2)
    same_both = _pairs(table)
    same_1 = _pairs(table.sum(axis=1))
    same_2 = _pairs(table.sum(axis=0))
    return (same_1 - same_both) + omega * (same_2 - same_both)


def vi_distance(c1, c2):
    """Variation of information between two clusterings, in bits.

    ``H(c1) + H(c2) - 2 I(c1, c2)``, evaluated as
    ``-sum_hk p_hk [log2(p_hk / p_h) + log2(p_hk / p_k)]`` so that identical
    partitions give exactly zero.  Credible-ball radii reported elsewhere in
    the package inherit the base-2 logarithm.
    """
    table = contingency_table(c1, c2).astype(np.float64)
    n = table.sum()
    rows = np.broadcast_to(table.sum(axis=1, keepdims=True), table.shape)
    cols = np.broadcast_to(table.sum(axis=0, keepdims=True), table.shape)
    nz = table > 0
    t = table[nz]
    terms = t * (np.log2(t / rows[nz]) + np.log2(t / cols[nz]))
    return max(float(-terms.sum() / n), 0.0)


def adjusted_rand_index(c1, c2):
    """Hubert-Arabie adjusted Rand index."""
    table = contingency_table(c1, c2)
    n = table.sum()
    if n < 2:
        return 1.0
    index = _pairs(table)
    rows = _pairs(table.sum(axis=1))
    cols = _pairs(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = rows * cols / total
    maximum = (rows + cols) / 2.0
    if maximum == expected:
        # both trivial (all-one-cluster or all-singletons) and identical
        return 1.0
    return float((index - expected) / (maximum - expected))
