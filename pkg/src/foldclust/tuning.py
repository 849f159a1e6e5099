"""Choosing the loss parameter ``omega``.

Two tools: the averaged default, which sets the merge threshold ``gamma`` to
the grand mean of the distance matrix, and the elbow curve, which tracks how
much of the total distance mass stays inside clusters as ``omega`` grows.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .optimize import average_linkage_path, path_losses
from .partitions import LossParams


class DegenerateDistanceError(ValueError):
    """The distance matrix carries no information for choosing ``omega``."""


def gamma_avg(dmat):
    """Mean distance over pairs ``i < j``."""
    dmat = np.asarray(dmat, dtype=np.float64)
    n = dmat.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    return float(dmat[np.triu_indices(n, 1)].mean())


def omega_avg(dmat):
    """Loss parameter whose merge threshold equals the mean pairwise distance.

    Raises
    ------
    DegenerateDistanceError
        When every distance is 1 (``omega`` would be infinite) or every
        distance is 0 (``omega`` would be 0 and any merge is favoured).
    """
    g = gamma_avg(dmat)
    if g >= 1.0:
        raise DegenerateDistanceError("all pairwise distances equal 1; the averaged omega is infinite")
    if g <= 0.0:
        raise DegenerateDistanceError("all pairwise distances equal 0; the averaged omega is 0")
    return LossParams(g / (1.0 - g))


@dataclass(frozen=True)
class ElbowPoint:
    omega: float
    k_star: int
    r_omega: float


def path_within_sums(path, dmat):
    """Within-cluster distance mass ``sum_{i<j same cluster} D_ij`` along ``path``."""
    dmat = np.asarray(dmat, dtype=np.float64)
    w = path.weights
    block = dmat * w[:, None] * w[None, :]
    out = np.zeros(len(path))
    for step, (a, b) in enumerate(path.merges):
        out[step + 1] = out[step] + block[a, b]
        block[a, :] += block[b, :]
        block[:, a] += block[:, b]
    return out


def default_omega_grid(dmat, num=50):
    """``omega`` values whose thresholds sit at evenly spaced quantiles of the distances."""
    dmat = np.asarray(dmat, dtype=np.float64)
    d = dmat[np.triu_indices(dmat.shape[0], 1)]
    gammas = np.unique(np.quantile(d, np.linspace(0.01, 0.99, num)))
    gammas = gammas[(gammas > 0) & (gammas < 1)]
    return gammas / (1.0 - gammas)


def elbow_curve(dmat, omegas=None, path=None):
    """Share of distance mass kept within clusters, for each ``omega``.

    For every ``omega`` the minimizer over the average-linkage path is found,
    and ``r`` is its within-cluster distance sum divided by the total over
    all pairs.  The output is sorted by ``omega``.

    Returns
    -------
    list of ElbowPoint
    """
    dmat = np.asarray(dmat, dtype=np.float64)
    if omegas is None:
        omegas = default_omega_grid(dmat)
    omegas = np.sort(np.asarray(omegas, dtype=np.float64))
    if omegas.size == 0:
        raise ValueError("omega grid is empty")
    if path is None:
        path = average_linkage_path(dmat)
    within = path_within_sums(path, dmat)
    total = within[-1]
    points = []
    for omega in omegas:
        losses = path_losses(path, dmat, LossParams(float(omega)))
        level = len(losses) - 1 - int(np.argmin(losses[::-1]))
        k = len(path) - level
        if total > 0:
            r = within[level] / total
        else:
            r = 1.0 if k == 1 else 0.0
        points.append(ElbowPoint(float(omega), int(k), float(min(max(r, 0.0), 1.0))))
    return points


def write_elbow_csv(path, points):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["omega", "k", "r_omega"])
        for p in points:
            out.writerow([repr(p.omega), p.k_star, repr(p.r_omega)])


def read_elbow_csv(path):
    with open(path, newline="") as fh:
        return [ElbowPoint(float(r["omega"]), int(r["k"]), float(r["r_omega"]))
                for r in csv.DictReader(fh)]
