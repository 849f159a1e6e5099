"""Shared builders for tests."""

import numpy as np

from foldclust.gibbs import MixtureDraw


def random_delta(n, seed, scale=2.0):
    """Hellinger distances between unit-variance Gaussians at random points.

    Equal covariances make ``1 - H^2`` a Gaussian kernel of the mean gap, so
    the result is a genuine distance matrix in [0, 1].
    """
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2)) * scale
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    d = np.sqrt(-np.expm1(-sq / 8.0))
    np.fill_diagonal(d, 0.0)
    return d


def random_draw(rng, n, k, p=2):
    w = rng.dirichlet(np.ones(k))
    means = rng.normal(size=(k, p)) * 2
    chols = np.empty((k, p, p))
    for j in range(k):
        a = rng.normal(size=(p, p))
        chols[j] = np.linalg.cholesky(a @ a.T + 0.5 * np.eye(p))
    alloc = rng.integers(0, k, n)
    return MixtureDraw(w, means, chols, alloc)


def block_delta(sizes, within=0.1, across=0.9):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    d = np.where(labels[:, None] == labels[None, :], within, across)
    np.fill_diagonal(d, 0.0)
    return d.astype(float), labels


def successive_conditional(prior, n, sweeps, seed):
    """Joint chain over (parameters, data): one Gibbs sweep, then fresh data from the model.

    Its stationary law is the prior times the likelihood, so every parameter
    marginal must match the prior.  Returns the visited states as arrays
    ``(weights, means, chols)``.
    """
    from foldclust.gibbs import _State, _sweep, sample_from_model, sample_prior_parameters

    rng = np.random.default_rng(seed)
    w, m, c = sample_prior_parameters(prior, rng)
    _, x = sample_from_model(w, m, c, n, rng)
    state = _State(w, m, c)
    out_w = np.empty((sweeps, prior.k))
    out_m = np.empty((sweeps, prior.k, prior.dim))
    out_c = np.empty((sweeps, prior.k, prior.dim, prior.dim))
    for t in range(sweeps):
        _sweep(x, state, prior, rng)
        _, x = sample_from_model(state.weights, state.means, state.chols, n, rng)
        out_w[t], out_m[t], out_c[t] = state.weights, state.means, state.chols
    return out_w, out_m, out_c


def batch_means_z(values, expected, batches=50):
    """z-score of a chain average against a known expectation, with batch-means SE."""
    v = np.asarray(values, dtype=float)
    size = v.size // batches
    means = v[: size * batches].reshape(batches, size).mean(axis=1)
    se = means.std(ddof=1) / np.sqrt(batches)
    return (means.mean() - expected) / se
