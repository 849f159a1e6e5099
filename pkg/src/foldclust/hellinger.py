"""Hellinger distances between Gaussian kernels and the posterior-expected
distance matrix between localized densities.

The distance used throughout is the Hellinger distance ``H`` itself (not its
square), so values lie in ``[0, 1]`` and ``1 - H**2`` is the Bhattacharyya
coefficient.
"""

import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DELTA_MAGIC = b"FOLDDMAT"


def _bhattacharyya_log(mean1, chol1, mean2, chol2):
    """log Bhattacharyya coefficient, broadcasting over leading axes."""
    cov1 = chol1 @ np.swapaxes(chol1, -1, -2)
    cov2 = chol2 @ np.swapaxes(chol2, -1, -2)
    avg = 0.5 * (cov1 + cov2)
    chol_avg = np.linalg.cholesky(avg)
    diff = (mean1 - mean2)[..., None]
    z = np.linalg.solve(chol_avg, diff)[..., 0]
    maha = np.sum(z * z, axis=-1)

    def logdet(c):
        return 2.0 * np.sum(np.log(np.diagonal(c, axis1=-2, axis2=-1)), axis=-1)

    return 0.25 * logdet(chol1) + 0.25 * logdet(chol2) - 0.5 * logdet(chol_avg) - 0.125 * maha


def _to_distance(log_bc):
    # 1 - BC via expm1 keeps precision for nearly identical kernels
    return np.sqrt(np.clip(-np.expm1(np.minimum(log_bc, 0.0)), 0.0, 1.0))


def hellinger_gaussian(g1, g2):
    """Hellinger distance between two Gaussian kernels.

    Parameters
    ----------
    g1, g2 : GaussianKernel

    Returns
    -------
    float in [0, 1]
    """
    if g1.mean.shape != g2.mean.shape:
        raise ValueError("kernels have different dimensions")
    if np.array_equal(g1.mean, g2.mean) and np.array_equal(g1.cov, g2.cov):
        return 0.0
    chol1 = np.linalg.cholesky(g1.cov)
    chol2 = np.linalg.cholesky(g2.cov)
    return float(_to_distance(_bhattacharyya_log(g1.mean, chol1, g2.mean, chol2)))


def kernel_distance_matrix(means, chols):
    """``K x K`` Hellinger distances between the kernels of one mixture.

    Only the ``K(K-1)/2`` distinct pairs are evaluated.
    """
    means = np.asarray(means, dtype=np.float64)
    chols = np.asarray(chols, dtype=np.float64)
    k = means.shape[0]
    out = np.zeros((k, k))
    if k < 2:
        return out
    i, j = np.triu_indices(k, 1)
    d = _to_distance(_bhattacharyya_log(means[i], chols[i], means[j], chols[j]))
    out[i, j] = d
    out[j, i] = d
    return out


def per_draw_distance_matrix(draw):
    """Pairwise distances between localized densities for a single draw."""
    h = kernel_distance_matrix(draw.means, draw.chols)
    alloc = np.asarray(draw.alloc)
    return h.take(alloc, axis=0).take(alloc, axis=1)


def _chunk_sum(samples, start, stop, kernel_fn):
    acc = np.zeros((samples.n, samples.n))
    for t in range(start, stop):
        alloc = samples.alloc[t]
        acc += kernel_fn(t).take(alloc, axis=0).take(alloc, axis=1)
    return acc


def _average_over_draws(samples, kernel_fn, chunk=64, n_jobs=1):
    bounds = [(s, min(s + chunk, samples.t)) for s in range(0, samples.t, chunk)]
    if n_jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            partials = list(pool.map(lambda b: _chunk_sum(samples, b[0], b[1], kernel_fn), bounds))
    else:
        partials = [_chunk_sum(samples, a, b, kernel_fn) for a, b in bounds]
    # fixed-order pairwise reduction of chunk partials
    while len(partials) > 1:
        paired = [partials[i] + partials[i + 1] for i in range(0, len(partials) - 1, 2)]
        if len(partials) % 2:
            paired.append(partials[-1])
        partials = paired
    out = partials[0] / samples.t
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def estimate_delta(samples, chunk=64, n_jobs=1):
    """Monte-Carlo estimate of the posterior expected Hellinger distance matrix.

    Each draw contributes ``H_t[s_i, s_j]`` where ``H_t`` is the ``K x K``
    kernel distance matrix of that draw; the contributions are averaged over
    draws in fixed-size chunks combined by pairwise summation, so the result
    does not depend on ``n_jobs``.
    """
    return _average_over_draws(
        samples, lambda t: kernel_distance_matrix(samples.means[t], samples.chols[t]),
        chunk=chunk, n_jobs=n_jobs)


def allocation_split_frequency(samples, chunk=64):
    """Fraction of draws in which ``s_i != s_j``: estimates ``P(s_i != s_j | X)``."""
    k = samples.k
    ones = np.ones((k, k)) - np.eye(k)
    return _average_over_draws(samples, lambda t: ones, chunk=chunk)


def delta_violations(d):
    """Largest violation of each distance-matrix invariant (all zero when valid)."""
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    worst_triangle = 0.0
    for j in range(n):
        # d_il <= d_ij + d_jl for every (i, l)
        gap = d - (d[:, j][:, None] + d[j, :][None, :])
        worst_triangle = max(worst_triangle, float(gap.max()))
    return {
        "lower": float(max(0.0, -d.min())),
        "upper": float(max(0.0, d.max() - 1.0)),
        "diagonal": float(np.abs(np.diag(d)).max()),
        "symmetry": float(np.abs(d - d.T).max()),
        "triangle": max(0.0, worst_triangle),
    }


def check_delta(d, tol=1e-9):
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    bad = {key: v for key, v in delta_violations(d).items() if v > tol}
    if bad:
        raise ValueError("distance matrix violates invariants: %s" % bad)
    return d


def write_delta_csv(path, d):
    """Row-major CSV of the full matrix; ``repr`` floats round-trip exactly."""
    d = np.asarray(d, dtype=np.float64)
    with open(path, "w", newline="\n") as fh:
        for row in d.tolist():
            fh.write(",".join(map(repr, row)) + "\n")


def read_delta_csv(path):
    with open(path) as fh:
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    d = np.array(rows, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("%s does not hold a square matrix" % path)
    return d


def write_delta_bin(path, d):
    """Binary layout: 8-byte magic, little-endian uint64 ``n``, then ``n*n``
    little-endian float64 values in row-major order."""
    d = np.ascontiguousarray(d, dtype="<f8")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("matrix must be square")
    with open(path, "wb") as fh:
        fh.write(DELTA_MAGIC)
        fh.write(struct.pack("<Q", d.shape[0]))
        fh.write(d.tobytes(order="C"))


def read_delta_bin(path):
    with open(path, "rb") as fh:
        if fh.read(8) != DELTA_MAGIC:
            raise ValueError("%s is not a distance-matrix file" % path)
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated distance-matrix file")
    return data.reshape(n, n).astype(np.float64)
