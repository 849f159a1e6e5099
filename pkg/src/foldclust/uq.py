"""Posterior uncertainty about the clustering.

Each posterior draw is turned into a clustering by minimizing the loss on
that draw's own distance matrix.  Those clusterings feed a credible ball
around the point estimate and a co-clustering similarity matrix.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .hellinger import kernel_distance_matrix
from .optimize import GreedyConfig, exhaustive_minimize, point_estimate
from .partitions import binder_distance, canonicalize, vi_distance

METRICS = ("vi", "binder")


def _draw_seed(seed, t):
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


def minimize_draw(means, chols, alloc, params, cfg=GreedyConfig(restarts=4), exact_max=8):
    """Loss minimizer for a single draw.

    Observations allocated to the same component have identical localized
    densities, and an optimal clustering never separates them (splitting
    two such clones costs ``omega`` for their pair while gaining nothing).
    The search therefore runs on the occupied components, weighted by their
    sizes, and exactly when there are at most ``exact_max`` of them.
    """
    used, inverse, counts = np.unique(alloc, return_inverse=True, return_counts=True)
    if used.size == 1:
        return np.zeros(alloc.size, dtype=np.intp)
    eta = kernel_distance_matrix(means[used], chols[used])
    w = counts.astype(np.float64)
    if used.size <= exact_max:
        unit_labels = exhaustive_minimize(eta, params, weights=w, max_n=exact_max)
    else:
        unit_labels = point_estimate(eta, params, cfg, weights=w).labels
    return canonicalize(unit_labels[inverse.ravel()])


def per_draw_minimizers(samples, params, cfg=GreedyConfig(restarts=4), n_jobs=1, exact_max=8):
    """Clustering minimizing the loss on each retained draw.

    Returns
    -------
    (t, n) int array, one canonical clustering per draw.
    """
    def one(t):
        c = GreedyConfig(cfg.restarts, cfg.max_sweeps, _draw_seed(cfg.seed, t), cfg.max_zealous)
        return minimize_draw(samples.means[t], samples.chols[t], samples.alloc[t], params, c, exact_max)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(one, range(samples.t)))
    else:
        rows = [one(t) for t in range(samples.t)]
    return np.array(rows, dtype=np.intp).reshape(samples.t, samples.n)


def partition_distance(c1, c2, metric="vi"):
    if metric == "vi":
        return vi_distance(c1, c2)
    if metric == "binder":
        return binder_distance(c1, c2, 1.0)
    raise ValueError("unknown metric %r (expected one of %s)" % (metric, ", ".join(METRICS)))


def _unique_rows(labels):
    """Distinct clusterings with their multiplicities, in first-seen order."""
    seen = {}
    for row in labels:
        key = canonicalize(row).tobytes()
        if key in seen:
            seen[key][1] += 1
        else:
            seen[key] = [canonicalize(row), 1]
    return [v[0] for v in seen.values()], np.array([v[1] for v in seen.values()])


def _sorted_unique(clusterings):
    keyed = {c.tobytes(): c for c in clusterings}
    return [keyed[k] for k in sorted(keyed, key=lambda b: tuple(np.frombuffer(b, dtype=np.intp)))]


@dataclass(frozen=True)
class CredibleBall:
    """Smallest ball around ``center`` holding at least ``level`` of the draws.

    Bounds are lists because several draws can tie; they are deduplicated
    and sorted lexicographically by label vector.
    """

    center: np.ndarray
    radius: float
    level: float
    metric: str
    horizontal: List[np.ndarray] = field(default_factory=list)
    vertical_upper: List[np.ndarray] = field(default_factory=list)
    vertical_lower: List[np.ndarray] = field(default_factory=list)
    coverage: float = 1.0

    def contains(self, c, tol=1e-12):
        return partition_distance(c, self.center, self.metric) <= self.radius + tol

    def covers_by_horizontal(self, c, tol=1e-12):
        """``c`` is no farther from the center than the horizontal bounds."""
        reach = max(partition_distance(h, self.center, self.metric) for h in self.horizontal)
        return partition_distance(c, self.center, self.metric) <= reach + tol

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "level": self.level,
            "metric": self.metric,
            "coverage": self.coverage,
            "horizontal": [c.tolist() for c in self.horizontal],
            "vertical_upper": [c.tolist() for c in self.vertical_upper],
            "vertical_lower": [c.tolist() for c in self.vertical_lower],
        }

    @classmethod
    def from_dict(cls, d):
        arr = lambda v: np.asarray(v, dtype=np.intp)  # noqa: E731
        return cls(arr(d["center"]), float(d["radius"]), float(d["level"]), d["metric"],
                   [arr(c) for c in d["horizontal"]], [arr(c) for c in d["vertical_upper"]],
                   [arr(c) for c in d["vertical_lower"]], float(d.get("coverage", 1.0)))


def credible_ball(center, draws_c, level=0.95, metric="vi"):
    """Credible ball around ``center`` from per-draw clusterings.

    The radius is the smallest observed distance ``eps`` such that at least
    ``level`` of the draws lie within ``eps`` of the center.  Horizontal
    bounds are the in-ball draws farthest from the center; vertical upper
    (lower) bounds are the farthest among in-ball draws with the fewest
    (most) clusters.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    draws_c = np.asarray(draws_c)
    if draws_c.ndim != 2 or draws_c.shape[0] == 0:
        raise ValueError("need a nonempty (t, n) array of clusterings")
    center = canonicalize(center)
    if draws_c.shape[1] != center.size:
        raise ValueError("clusterings have %d labels, center has %d" % (draws_c.shape[1], center.size))
    distinct, counts = _unique_rows(draws_c)
    dist = np.array([partition_distance(c, center, metric) for c in distinct])
    t = counts.sum()
    grid = np.unique(dist)
    needed = level * t
    radius = grid[-1]
    for eps in grid:
        if counts[dist <= eps].sum() >= needed - 1e-9 * t:
            radius = eps
            break
    inside = [i for i in range(len(distinct)) if dist[i] <= radius]
    far = max(dist[i] for i in inside)
    horizontal = [distinct[i] for i in inside if dist[i] == far]
    ks = {i: int(distinct[i].max()) + 1 for i in inside}

    def vertical(k_target):
        pool = [i for i in inside if ks[i] == k_target]
        top = max(dist[i] for i in pool)
        return [distinct[i] for i in pool if dist[i] == top]

    return CredibleBall(
        center=center, radius=float(radius), level=float(level), metric=metric,
        horizontal=_sorted_unique(horizontal),
        vertical_upper=_sorted_unique(vertical(min(ks.values()))),
        vertical_lower=_sorted_unique(vertical(max(ks.values()))),
        coverage=float(counts[dist <= radius].sum() / t),
    )


def write_ball_json(path, ball):
    with open(path, "w") as fh:
        json.dump(ball.to_dict(), fh, indent=2)
        fh.write("\n")


def read_ball_json(path):
    with open(path) as fh:
        return CredibleBall.from_dict(json.load(fh))


def coclustering_frequency(draws_c):
    """Fraction of clusterings in which each pair shares a cluster (unit diagonal)."""
    draws_c = np.asarray(draws_c)
    if draws_c.ndim != 2 or draws_c.shape[0] == 0:
        raise ValueError("need a nonempty (t, n) array of clusterings")
    t, n = draws_c.shape
    acc = np.zeros((n, n))
    for row in draws_c:
        onehot = np.zeros((n, int(row.max()) + 1))
        onehot[np.arange(n), row] = 1.0
        acc += onehot @ onehot.T
    return acc / t


def fold_psm(draws_c):
    """Co-clustering frequencies of the per-draw loss minimizers."""
    return coclustering_frequency(draws_c)
