"""Searching for clusterings that minimize the fusing loss.

Three searches are provided:

* :func:`average_linkage_path` builds the average-linkage (UPGMA) tree on a
  distance matrix; :func:`best_on_path` picks the tree level of least loss.
* :func:`greedy_minimize` is a SALSO-style local search: sequential
  allocation, reallocation sweeps, and break-and-reallocate moves, repeated
  over restarts.
* :func:`exhaustive_minimize` enumerates every set partition (small ``n``).

All searches accept optional unit ``weights``.  A unit of weight ``w`` stands
for ``w`` observations that are at distance zero from each other and share
every other distance, e.g. the members of one mixture component in a single
posterior draw.  Pair terms between units are scaled by ``w_u * w_v``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .partitions import LossParams, canonicalize


def _omega(params):
    return params.omega if isinstance(params, LossParams) else float(params)


def _prepare(dmat, weights):
    dmat = np.asarray(dmat, dtype=np.float64)
    if dmat.ndim != 2 or dmat.shape[0] != dmat.shape[1]:
        raise ValueError("distance matrix must be square")
    m = dmat.shape[0]
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (m,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per unit")
    return dmat, w


def weighted_loss(labels, dmat, params, weights=None):
    """Loss of a clustering of weighted units (equals ``fold_loss`` for unit weights)."""
    dmat, w = _prepare(dmat, weights)
    labels = np.asarray(labels)
    omega = _omega(params)
    same = labels[:, None] == labels[None, :]
    terms = np.where(same, dmat, omega * (1.0 - dmat))
    np.fill_diagonal(terms, 0.0)
    return float(w @ terms @ w) / 2.0


# ---------------------------------------------------------------------------
# average-linkage candidates


@dataclass(frozen=True)
class CandidatePath:
    """Nested clusterings from ``m`` singletons down to one cluster.

    Attributes
    ----------
    labels : (m, m) int array
        Row ``r`` is the canonical clustering with ``m - r`` clusters.
    merge_heights : (m - 1,) array
        Average-linkage dissimilarity of each merge, in merge order.
    merges : (m - 1, 2) int array
        Slots ``(a, b)`` fused at each step; a slot is named by the smallest
        unit index of its cluster and ``b`` is folded into ``a``.
    weights : (m,) array
    """

    labels: np.ndarray
    merge_heights: np.ndarray
    merges: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.labels.shape[0]

    @property
    def clusterings(self) -> List[np.ndarray]:
        return list(self.labels)

    @property
    def n_clusters(self):
        return np.arange(len(self), 0, -1)


def average_linkage_path(dmat, weights=None):
    """Agglomerative average-linkage tree on ``dmat``.

    Ties between equal linkage values are broken towards the lexicographically
    smallest pair of cluster slots.

    Returns
    -------
    CandidatePath
    """
    dmat, w = _prepare(dmat, weights)
    m = dmat.shape[0]
    # cross sums of weighted distances between slots
    sums = dmat * w[:, None] * w[None, :]
    size = w.copy()
    link = dmat.copy()
    link[np.tril_indices(m)] = np.inf
    active = np.ones(m, dtype=bool)
    assign = np.arange(m)
    labels = np.empty((m, m), dtype=np.intp)
    labels[0] = np.arange(m)
    heights = np.empty(m - 1)
    merges = np.empty((m - 1, 2), dtype=np.intp)
    for step in range(m - 1):
        flat = int(np.argmin(link))
        a, b = divmod(flat, m)
        heights[step] = link[a, b]
        merges[step] = a, b
        sums[a, :] += sums[b, :]
        sums[:, a] += sums[:, b]
        size[a] += size[b]
        active[b] = False
        row = np.where(active, sums[a] / (size[a] * size), np.inf)
        link[a, a + 1:] = row[a + 1:]
        link[:a, a] = row[:a]
        link[b, :] = np.inf
        link[:, b] = np.inf
        assign[assign == b] = a
        labels[step + 1] = canonicalize(assign)
    return CandidatePath(labels, heights, merges, w)


def path_losses(path, dmat, params):
    """Loss of every clustering on ``path`` evaluated against ``dmat``.

    ``dmat`` may differ from the matrix the path was built on; losses are
    accumulated merge by merge from block sums, in ``O(m)`` per merge.
    """
    dmat, w = _prepare(dmat, path.weights)
    omega = _omega(params)
    block = dmat * w[:, None] * w[None, :]
    size = w.copy()
    iu = np.triu_indices(dmat.shape[0], 1)
    ww = (w[:, None] * w[None, :])[iu]
    out = np.empty(len(path))
    out[0] = float(np.sum(omega * (ww - block[iu])))
    for step, (a, b) in enumerate(path.merges):
        cross = block[a, b]
        out[step + 1] = out[step] + (1.0 + omega) * cross - omega * size[a] * size[b]
        block[a, :] += block[b, :]
        block[:, a] += block[:, b]
        size[a] += size[b]
    return out


def best_on_path(path, dmat, params):
    """Path member of least loss; ties go to the member with fewer clusters."""
    losses = path_losses(path, dmat, params)
    best = len(losses) - 1 - int(np.argmin(losses[::-1]))
    return path.labels[best].copy()


# ---------------------------------------------------------------------------
# greedy search


@dataclass(frozen=True)
class GreedyConfig:
    restarts: int = 16
    max_sweeps: int = 100
    seed: int = 0
    max_zealous: Optional[int] = None

    def __post_init__(self):
        if self.restarts < 1 or self.max_sweeps < 1:
            raise ValueError("restarts and max_sweeps must be >= 1")


class _LocalSearch:
    """Mutable clustering of weighted units with cached cluster sums.

    Cluster slots are kept on a compact axis that grows on demand, so the
    per-unit work scales with the number of clusters rather than units.  The
    loss is tracked incrementally: ``w_u * costs(u)[h]`` is the loss change
    of moving ``u`` from a singleton into cluster ``h``.
    """

    def __init__(self, dmat, w, omega, tol, record=False):
        self.record = record
        self.dw = dmat * w[None, :]
        self.w = w
        self.omega = omega
        self.tol = tol
        m = dmat.shape[0]
        self.m = m
        self.labels = np.full(m, -1, dtype=np.intp)
        cap = min(m, 16) or 1
        self.csum = np.zeros((m, cap))   # csum[u, h] = sum_{v in h} w_v d_uv
        self.cw = np.zeros(cap)          # total weight of cluster h
        # loss with every unit a singleton
        self.current = float(omega * (w @ (1.0 - dmat) @ w - np.sum(w * w * (1.0 - np.diag(dmat))))) / 2.0
        self.trace = []

    def _free_slot(self):
        empty = np.flatnonzero(self.cw <= 0)
        if empty.size:
            return int(empty[0])
        cap = self.cw.size
        self.csum = np.concatenate([self.csum, np.zeros((self.m, cap))], axis=1)
        self.cw = np.concatenate([self.cw, np.zeros(cap)])
        return cap

    def costs(self, u):
        """Per-cluster placement cost of unit ``u`` (per unit weight), ``u`` removed."""
        return (1.0 + self.omega) * self.csum[u] - self.omega * self.cw

    def place(self, u, h):
        if h < 0 or h >= self.cw.size or self.cw[h] <= 0:
            h = self._free_slot()
        else:
            self.current += self.w[u] * float(self.costs(u)[h])
        self.labels[u] = h
        self.csum[:, h] += self.dw[:, u]
        self.cw[h] += self.w[u]

    def remove(self, u):
        h = self.labels[u]
        self.csum[:, h] -= self.dw[:, u]
        self.cw[h] -= self.w[u]
        if self.cw[h] <= 1e-9 * self.w[u]:
            self.cw[h] = 0.0
        else:
            self.current -= self.w[u] * float(self.costs(u)[h])
        self.labels[u] = -1
        return h

    def best_cluster(self, u):
        vals = np.where(self.cw > 0, self.costs(u), np.inf)
        h = int(np.argmin(vals)) if vals.size else 0
        if not vals.size or vals[h] >= 0.0:
            return -1, 0.0      # a fresh singleton costs 0
        return h, float(vals[h])

    def sweep(self, rng):
        moved = 0
        for u in rng.permutation(self.m):
            h = self.labels[u]
            self.remove(u)
            current = float(self.costs(u)[h]) if self.cw[h] > 0 else 0.0
            best_h, best = self.best_cluster(u)
            if best < current - self.tol / self.w[u]:
                self.place(u, best_h)
                moved += 1
                if self.record:
                    self.trace.append(self.current)
            else:
                self.place(u, h if self.cw[h] > 0 else -1)
        return moved

    def loss(self):
        same = self.labels[:, None] == self.labels[None, :]
        d = self.dw / self.w[None, :]
        terms = np.where(same, d, self.omega * (1.0 - d))
        np.fill_diagonal(terms, 0.0)
        return float(self.w @ terms @ self.w) / 2.0

    def snapshot(self):
        return self.labels.copy(), self.csum.copy(), self.cw.copy(), self.current

    def restore(self, snap):
        labels, csum, cw, self.current = snap
        self.labels, self.csum, self.cw = labels.copy(), csum.copy(), cw.copy()


def _sequential_allocation(search, rng):
    for u in rng.permutation(search.m):
        h, _ = search.best_cluster(u)
        search.place(u, h)


def _local_optimum(search, rng, max_sweeps):
    for _ in range(max_sweeps):
        if search.sweep(rng) == 0:
            break


def _break_and_reallocate(search, rng, max_sweeps, max_attempts):
    """Dissolve clusters one at a time and reallocate their members.

    A dissolution is kept only when it lowers the loss, after which the
    reallocation sweeps run again.  Passes over all clusters repeat until a
    full pass brings no improvement or ``max_attempts`` is exhausted.
    """
    attempts = 0
    improved = True
    while improved:
        improved = False
        for h in rng.permutation(np.flatnonzero(search.cw > 0)):
            if max_attempts is not None and attempts >= max_attempts:
                return
            members = np.flatnonzero(search.labels == h)
            if members.size == 0:
                continue
            attempts += 1
            before = search.current
            snap = search.snapshot()
            for u in members:
                search.remove(u)
            for u in rng.permutation(members):
                hh, _ = search.best_cluster(u)
                search.place(u, hh)
            if search.current < before - search.tol:
                _local_optimum(search, rng, max_sweeps)
                improved = True
            else:
                search.restore(snap)


def greedy_minimize(dmat, params, cfg=GreedyConfig(), weights=None, init=None, return_trace=False):
    """SALSO-style greedy minimization of the fusing loss.

    Each restart starts from a sequential allocation in random order (or from
    one of the clusterings in ``init``), runs reallocation sweeps until no
    unit moves, then tries dissolving each cluster and reallocating its
    members, keeping the change only when the loss drops.  The best
    clustering over restarts is returned; ties favour the earliest restart.

    Parameters
    ----------
    dmat : (m, m) array
    params : LossParams or float
    cfg : GreedyConfig
    weights : (m,) array, optional
    init : sequence of label arrays, optional
        Starting clusterings used for the first restarts.
    return_trace : bool
        Also return the per-restart list of losses after each accepted sweep move.
    """
    dmat, w = _prepare(dmat, weights)
    omega = _omega(params)
    m = dmat.shape[0]
    scale = max(1.0, float(w.sum()) ** 2) * max(1.0, omega)
    tol = 1e-12 * scale
    init = [] if init is None else [canonicalize(c) for c in init]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best_labels, best_loss = None, np.inf
    traces = []
    for r in range(cfg.restarts):
        rng = np.random.default_rng(seeds[r])
        search = _LocalSearch(dmat, w, omega, tol, record=return_trace)
        if r < len(init):
            slots = {}
            for u, h in enumerate(init[r]):
                search.place(u, slots.get(h, -1))
                slots.setdefault(h, search.labels[u])
        else:
            _sequential_allocation(search, rng)
        search.current = search.loss()
        if return_trace:
            search.trace.append(search.current)
        _local_optimum(search, rng, cfg.max_sweeps)
        _break_and_reallocate(search, rng, cfg.max_sweeps, cfg.max_zealous)
        loss = search.loss()
        traces.append(search.trace)
        if loss < best_loss - tol:
            best_loss, best_labels = loss, canonicalize(search.labels)
    if m == 0:
        best_labels = np.zeros(0, dtype=np.intp)
    if return_trace:
        return best_labels, traces
    return best_labels


# ---------------------------------------------------------------------------
# exhaustive search


def exhaustive_minimize(dmat, params, weights=None, max_n=12):
    """Global minimizer over all set partitions, by depth-first enumeration of
    restricted-growth strings with a lower-bound prune.

    The first minimizer in lexicographic order of the label vector is returned.
    """
    dmat, w = _prepare(dmat, weights)
    m = dmat.shape[0]
    if m > max_n:
        raise ValueError("exhaustive search supports at most %d units, got %d" % (max_n, m))
    if m <= 1:
        return np.zeros(m, dtype=np.intp)
    omega = _omega(params)
    ww = w[:, None] * w[None, :]
    same_cost = ww * dmat
    diff_cost = ww * omega * (1.0 - dmat)
    extra = (same_cost - diff_cost).tolist()
    base = [float(diff_cost[i, :i].sum()) for i in range(m)]
    floor = np.minimum(same_cost, diff_cost)
    # bound[i] = least possible cost of placing units i..m-1
    bound = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        bound[i] = bound[i + 1] + float(floor[i, :i].sum())
    slack = 1e-12 * max(1.0, float(bound[0]))

    labels = [0] * m
    members = [[0]]
    best = [np.inf, None]

    def descend(i, partial):
        if partial + bound[i] > best[0] + slack:
            return
        if i == m:
            if partial < best[0]:
                best[0], best[1] = partial, list(labels)
            return
        row = extra[i]
        for h, mem in enumerate(members):
            cost = base[i] + sum(row[j] for j in mem)
            labels[i] = h
            mem.append(i)
            descend(i + 1, partial + cost)
            mem.pop()
        labels[i] = len(members)
        members.append([i])
        descend(i + 1, partial + base[i])
        members.pop()

    descend(1, 0.0)
    return np.array(best[1], dtype=np.intp)


# ---------------------------------------------------------------------------
# combined point estimate


@dataclass(frozen=True)
class PointEstimate:
    labels: np.ndarray
    risk: float
    path_labels: np.ndarray
    path_risk: float
    greedy_labels: np.ndarray
    greedy_risk: float
    path: CandidatePath = field(repr=False)

    @property
    def k(self):
        return int(self.labels.max()) + 1


def point_estimate(dmat, params, cfg=GreedyConfig(), weights=None, path=None):
    """Run both the path search and the greedy search and keep the lower-risk result.

    The path optimum seeds the first greedy restart, so the greedy result is
    never worse than the path result.  On equal risk the clustering with fewer
    clusters is returned.
    """
    dmat, w = _prepare(dmat, weights)
    if path is None:
        path = average_linkage_path(dmat, w)
    c_path = best_on_path(path, dmat, params)
    c_greedy = greedy_minimize(dmat, params, cfg, weights=w, init=[c_path])
    r_path = weighted_loss(c_path, dmat, params, w)
    r_greedy = weighted_loss(c_greedy, dmat, params, w)
    if r_greedy < r_path or (r_greedy == r_path and c_greedy.max() < c_path.max()):
        chosen, risk = c_greedy, r_greedy
    else:
        chosen, risk = c_path, r_path
    return PointEstimate(chosen, risk, c_path, r_path, c_greedy, r_greedy, path)
