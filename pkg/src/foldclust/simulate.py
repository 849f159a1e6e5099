"""Seeded generators for labelled synthetic data sets.

Every generator returns a :class:`LabeledDataset` whose ``truth`` records the
outer component each point was drawn from.  Scenario descriptions are plain
dictionaries so they can be written to and read from JSON.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .partitions import canonicalize

SCENARIOS = ("gaussian", "skew-gaussian", "skew-symmetric", "moons", "spirals")


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray
    truth: np.ndarray
    spec: dict

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class SkewGaussianParams:
    """Multivariate skew-normal with location ``xi``, scale ``omega_mat`` and shape ``alpha``."""

    xi: np.ndarray
    omega_mat: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=np.float64))
        om = np.atleast_2d(np.asarray(self.omega_mat, dtype=np.float64))
        al = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if om.shape != (xi.size, xi.size) or al.size != xi.size:
            raise ValueError("inconsistent skew-normal parameter shapes")
        np.linalg.cholesky(om)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "omega_mat", om)
        object.__setattr__(self, "alpha", al)

    def delta(self):
        scale = np.sqrt(np.diag(self.omega_mat))
        corr = self.omega_mat / np.outer(scale, scale)
        ca = corr @ self.alpha
        return ca / np.sqrt(1.0 + self.alpha @ ca)

    def mean(self):
        return self.xi + np.sqrt(np.diag(self.omega_mat)) * self.delta() * np.sqrt(2.0 / np.pi)

    def sample(self, size, rng):
        """Hidden-truncation sampler: keep ``U`` when the latent ``U0 > 0``, else flip it."""
        p = self.xi.size
        scale = np.sqrt(np.diag(self.omega_mat))
        corr = self.omega_mat / np.outer(scale, scale)
        d = self.delta()
        joint = np.empty((p + 1, p + 1))
        joint[0, 0] = 1.0
        joint[0, 1:] = joint[1:, 0] = d
        joint[1:, 1:] = corr
        z = rng.standard_normal((size, p + 1)) @ np.linalg.cholesky(joint).T
        u = np.where(z[:, :1] > 0, z[:, 1:], -z[:, 1:])
        return self.xi + u * scale


# ---------------------------------------------------------------------------
# default scenario parameters

SCENARIO1 = {
    "weights": [0.45, 0.25, 0.3],
    "means": [[6.5, 5.0], [0.0, 0.0], [-5.0, -5.0]],
    "covs": [[[1.0, 0.0], [0.0, 1.0]], [[5.0, 0.0], [0.0, 2.0]], [[3.0, 0.0], [0.0, 1.0]]],
}

SCENARIO2 = dict(SCENARIO1, alphas=[[1.0, 1.0], [-10.0, 15.0], [4.0, -17.0]])

SKEW_SYMMETRIC = {
    "weights": [0.55, 0.3, 0.15],
    "components": [
        {"type": "mixture", "weights": [0.364, 0.212, 0.424], "parts": [
            {"type": "skew", "xi": [2.5, 3.5], "omega": [[1.0, 0.0], [0.0, 1.0]], "alpha": [-10.0, 15.0]},
            {"type": "gaussian", "mean": [2.325, 4.381], "cov": [[0.2, 0.0], [0.0, 0.8]]},
            {"type": "gaussian", "mean": [1.085, 2.009], "cov": [[0.7, 0.0], [0.0, 0.6]]},
        ]},
        {"type": "skew", "xi": [0.0, -3.5], "omega": [[5.0, 0.0], [0.0, 2.0]], "alpha": [4.0, -17.0]},
        {"type": "gaussian", "mean": [-4.0, -2.5], "cov": [[0.5, 0.5], [0.5, 2.5]]},
    ],
}


def _simplex(w):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be a probability vector")
    return w / w.sum()


def _labels(weights, n, rng):
    counts = rng.multinomial(n, weights)
    labels = np.repeat(np.arange(weights.size), counts)
    rng.shuffle(labels)
    return labels


def _draw_component(comp, size, rng):
    kind = comp["type"]
    if kind == "gaussian":
        mean = np.asarray(comp["mean"], dtype=np.float64)
        cov = np.asarray(comp["cov"], dtype=np.float64)
        chol = np.linalg.cholesky(cov)
        return mean + rng.standard_normal((size, mean.size)) @ chol.T
    if kind == "skew":
        return SkewGaussianParams(comp["xi"], comp["omega"], comp["alpha"]).sample(size, rng)
    if kind == "mixture":
        w = _simplex(comp["weights"])
        sub = _labels(w, size, rng)
        dim = _dim(comp["parts"][0])
        out = np.empty((size, dim))
        for j, part in enumerate(comp["parts"]):
            idx = np.flatnonzero(sub == j)
            out[idx] = _draw_component(part, idx.size, rng)
        return out
    raise ValueError("unknown component type %r" % kind)


def _dim(comp):
    if comp["type"] == "gaussian":
        return len(comp["mean"])
    if comp["type"] == "skew":
        return len(comp["xi"])
    return _dim(comp["parts"][0])


def _mixture(spec, components, n, seed, name):
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = np.random.default_rng(seed)
    w = _simplex(spec["weights"])
    if len(components) != w.size:
        raise ValueError("need one component per weight")
    labels = _labels(w, n, rng)
    x = np.empty((n, _dim(components[0])))
    for m, comp in enumerate(components):
        idx = np.flatnonzero(labels == m)
        x[idx] = _draw_component(comp, idx.size, rng)
    full = {"scenario": name, "n": int(n), "seed": int(seed)}
    full.update(spec)
    return LabeledDataset(x, labels.astype(np.intp), full)


def gen_gaussian_mixture(spec=None, n=100, seed=0):
    spec = SCENARIO1 if spec is None else spec
    comps = [{"type": "gaussian", "mean": m, "cov": c} for m, c in zip(spec["means"], spec["covs"])]
    for c in comps:
        np.linalg.cholesky(np.asarray(c["cov"], dtype=np.float64))
    return _mixture(spec, comps, n, seed, "gaussian")


def gen_skew_gaussian_mixture(spec=None, n=100, seed=0):
    spec = SCENARIO2 if spec is None else spec
    comps = [{"type": "skew", "xi": m, "omega": c, "alpha": a}
             for m, c, a in zip(spec["means"], spec["covs"], spec["alphas"])]
    return _mixture(spec, comps, n, seed, "skew-gaussian")


def gen_skew_symmetric_mixture(n=100, seed=0, spec=None):
    spec = SKEW_SYMMETRIC if spec is None else spec
    if n < 1:
        raise ValueError("n must be >= 1")
    return _mixture(spec, spec["components"], n, seed, "skew-symmetric")


def gen_moons(n=500, noise_sd=0.1, seed=0, radius=1.0, dx=0.5, dy=0.25):
    """Two interlocking half-circles.

    The upper arc is centred at the origin; the lower, flipped arc is centred
    at ``(dx, -dy)``.  Points are spread evenly in angle with a random phase,
    and isotropic Gaussian noise of standard deviation ``noise_sd`` is added.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    n1 = (n + 1) // 2
    n2 = n - n1
    t1 = np.sort(rng.uniform(0.0, np.pi, n1))
    t2 = np.sort(rng.uniform(0.0, np.pi, n2))
    upper = np.column_stack([radius * np.cos(t1), radius * np.sin(t1)])
    lower = np.column_stack([dx + radius * np.cos(t2), -dy - radius * np.sin(t2)])
    x = np.vstack([upper, lower])
    labels = np.repeat([0, 1], [n1, n2])
    x = x + noise_sd * rng.standard_normal(x.shape)
    order = rng.permutation(n)
    spec = {"scenario": "moons", "n": int(n), "seed": int(seed), "noise_sd": float(noise_sd),
            "radius": float(radius), "dx": float(dx), "dy": float(dy)}
    return LabeledDataset(x[order], labels[order].astype(np.intp), spec)


def gen_spirals(n=300, arms=3, turns=1.0, noise_sd=0.05, seed=0):
    """Interleaved Archimedean spirals with angular noise, one arm per cluster."""
    if n < arms:
        raise ValueError("need at least one point per arm")
    rng = np.random.default_rng(seed)
    sizes = np.full(arms, n // arms)
    sizes[: n % arms] += 1
    xs, labels = [], []
    for a, m in enumerate(sizes):
        s = np.sqrt(rng.uniform(0.05, 1.0, m))
        theta = 2.0 * np.pi * turns * s + 2.0 * np.pi * a / arms
        theta = theta + noise_sd * rng.standard_normal(m) / np.maximum(s, 0.1)
        xs.append(np.column_stack([s * np.cos(theta), s * np.sin(theta)]))
        labels.append(np.full(m, a))
    x = np.vstack(xs)
    labels = np.concatenate(labels)
    order = rng.permutation(n)
    spec = {"scenario": "spirals", "n": int(n), "seed": int(seed), "arms": int(arms),
            "turns": float(turns), "noise_sd": float(noise_sd)}
    return LabeledDataset(x[order], labels[order].astype(np.intp), spec)


def generate(scenario, n, seed, **kwargs):
    if scenario == "gaussian":
        return gen_gaussian_mixture(kwargs.get("spec"), n, seed)
    if scenario == "skew-gaussian":
        return gen_skew_gaussian_mixture(kwargs.get("spec"), n, seed)
    if scenario == "skew-symmetric":
        return gen_skew_symmetric_mixture(n, seed, kwargs.get("spec"))
    if scenario == "moons":
        return gen_moons(n, seed=seed, **kwargs)
    if scenario == "spirals":
        return gen_spirals(n, seed=seed, **kwargs)
    raise ValueError("unknown scenario %r (choose from %s)" % (scenario, ", ".join(SCENARIOS)))


# ---------------------------------------------------------------------------
# files


def write_dataset_csv(path, data):
    """Feature columns ``x0..x{p-1}`` followed by a ``truth`` column."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x%d" % j for j in range(data.p)] + ["truth"])
        for row, lab in zip(data.x.tolist(), data.truth.tolist()):
            out.writerow([repr(v) for v in row] + [lab])


def read_dataset_csv(path):
    """Read a data CSV; a trailing ``truth`` column is optional.

    Returns ``(x, truth)`` with ``truth`` ``None`` when absent.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("%s is empty" % path)
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        float(header[0])
        header, body = None, rows
    except ValueError:
        pass
    has_truth = header is not None and header[-1] == "truth"
    if not body:
        if header is None:
            raise ValueError("%s has no rows" % path)
        width = len(header) - (1 if has_truth else 0)
        return np.empty((0, width)), (np.empty(0, dtype=np.intp) if has_truth else None)
    width = len(body[0]) - (1 if has_truth else 0)
    if width < 1 or any(len(r) != len(body[0]) for r in body):
        raise ValueError("%s has ragged or empty rows" % path)
    x = np.array([[float(v) for v in r[:width]] for r in body])
    truth = canonicalize(np.array([int(r[-1]) for r in body])) if has_truth else None
    return x, truth


def write_spec_json(path, spec):
    with open(path, "w") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")
