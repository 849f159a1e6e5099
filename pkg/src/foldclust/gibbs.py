"""Conjugate Gibbs sampler for a Bayesian finite Gaussian mixture.

The model is

    a ~ Dirichlet(alpha, ..., alpha)
    (mu_k, Sigma_k) ~ NIW(mu0, kappa, nu, Psi)      (location-scale model)
    s_i | a ~ Categorical(a)
    x_i | s_i = k ~ N(mu_k, Sigma_k)

with ``Sigma_k ~ InvWishart(nu, Psi)`` and ``mu_k | Sigma_k ~ N(mu0, Sigma_k / kappa)``.
Setting ``fixed_cov`` switches to the location model where every component
shares a known covariance and ``mu_k ~ N(mu0, loc_cov)``.

A sweep updates allocations, then weights, then component parameters.  Empty
components are refreshed from the prior so the label space stays at ``K``.
Label switching is not addressed; nothing downstream depends on labels.
"""

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)
DRAWS_MAGIC = "# foldclust-draws v1"


class DegenerateChainError(FloatingPointError):
    """Raised when a posterior scale matrix fails its Cholesky factorization."""


def check_data(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("data must be an n x p matrix")
    if x.shape[0] < 2 or x.shape[1] < 1:
        raise ValueError("need n >= 2 observations with p >= 1 features, got shape %s" % (x.shape,))
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite entries")
    return x


@dataclass(frozen=True)
class GaussianKernel:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape %s does not match mean length %d" % (cov.shape, mean.size))
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("covariance is not symmetric")
        np.linalg.cholesky(cov)  # raises LinAlgError if not PD
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size

    def logpdf(self, x):
        x = np.atleast_2d(x)
        chol = np.linalg.cholesky(self.cov)
        z = np.linalg.solve(chol, (x - self.mean).T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (np.sum(z * z, axis=0) + logdet + self.dim * _LOG_2PI)


@dataclass(frozen=True)
class GmmPrior:
    """Hyperparameters of the finite Gaussian mixture.

    ``loc_cov`` is the prior covariance of component means and is only used
    together with ``fixed_cov``.
    """

    k: int
    alpha: float
    mu: np.ndarray
    kappa: float = 1.0
    nu: float = 4.0
    psi: Optional[np.ndarray] = None
    fixed_cov: Optional[np.ndarray] = None
    loc_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        p = mu.size
        object.__setattr__(self, "mu", mu)
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        for name in ("psi", "fixed_cov", "loc_cov"):
            value = getattr(self, name)
            if value is None:
                if name == "psi":
                    object.__setattr__(self, "psi", np.eye(p))
                if name == "loc_cov":
                    object.__setattr__(self, "loc_cov", np.eye(p))
                continue
            value = np.atleast_2d(np.asarray(value, dtype=np.float64))
            if value.shape != (p, p):
                raise ValueError("%s must be %d x %d" % (name, p, p))
            try:
                np.linalg.cholesky(value)
            except np.linalg.LinAlgError:
                raise ValueError("%s must be positive definite" % name) from None
            object.__setattr__(self, name, value)
        if self.fixed_cov is None:
            if not self.kappa > 0:
                raise ValueError("kappa must be positive")
            if not self.nu > p - 1:
                raise ValueError("nu must exceed p - 1")

    @property
    def dim(self):
        return self.mu.size

    @classmethod
    def default(cls, p, k=30, alpha=0.5):
        """Location-scale defaults used for the synthetic benchmarks."""
        return cls(k=k, alpha=alpha, mu=np.zeros(p), kappa=1.0, nu=p + 2.0, psi=np.eye(p))

    @classmethod
    def location(cls, fixed_cov, k, alpha, mu=None, loc_cov=None):
        fixed_cov = np.atleast_2d(np.asarray(fixed_cov, dtype=np.float64))
        p = fixed_cov.shape[0]
        mu = np.zeros(p) if mu is None else mu
        return cls(k=k, alpha=alpha, mu=mu, fixed_cov=fixed_cov,
                   loc_cov=np.eye(p) if loc_cov is None else loc_cov)

    def to_dict(self):
        out = {"k": int(self.k), "alpha": float(self.alpha), "mu": self.mu.tolist()}
        if self.fixed_cov is None:
            out.update(kappa=float(self.kappa), nu=float(self.nu), psi=self.psi.tolist())
        else:
            out.update(fixed_cov=self.fixed_cov.tolist(), loc_cov=self.loc_cov.tolist())
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 9000
    burn_in: int = 1000
    thin: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_retained(self):
        return -(-(self.iterations - self.burn_in) // self.thin)


@dataclass(frozen=True)
class MixtureDraw:
    """A single posterior draw.  Covariances are stored by Cholesky factor."""

    weights: np.ndarray
    means: np.ndarray
    chols: np.ndarray
    alloc: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must lie on the simplex")
        alloc = np.asarray(self.alloc)
        if alloc.size and (alloc.min() < 0 or alloc.max() >= w.size):
            raise ValueError("allocation outside 0..K-1")

    @property
    def k(self):
        return self.weights.size

    @property
    def covs(self):
        return self.chols @ np.swapaxes(self.chols, -1, -2)

    @property
    def kernels(self):
        covs = self.covs
        return [GaussianKernel(self.means[k], covs[k]) for k in range(self.k)]

    @classmethod
    def from_kernels(cls, weights, kernels, alloc):
        means = np.array([g.mean for g in kernels])
        chols = np.array([np.linalg.cholesky(g.cov) for g in kernels])
        return cls(np.asarray(weights, dtype=np.float64), means, chols, np.asarray(alloc, dtype=np.intp))


def localized_params(draw, i):
    """Kernel of the component observation ``i`` is allocated to in ``draw``."""
    k = draw.alloc[i]
    chol = draw.chols[k]
    return GaussianKernel(draw.means[k], chol @ chol.T)


class PosteriorSamples:
    """Retained draws of a chain, stored as stacked arrays.

    Parameters
    ----------
    weights : (T, K) array
    means : (T, K, p) array
    chols : (T, K, p, p) array of lower Cholesky factors of the covariances
    alloc : (T, n) integer array
    """

    def __init__(self, weights, means, chols, alloc):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.chols = np.asarray(chols, dtype=np.float64)
        self.alloc = np.asarray(alloc, dtype=np.intp)
        t, k = self.weights.shape
        if t < 1:
            raise ValueError("need at least one retained draw")
        if self.means.shape[:2] != (t, k) or self.chols.shape[:2] != (t, k) or self.alloc.shape[0] != t:
            raise ValueError("inconsistent draw array shapes")
        for a in (self.weights, self.means, self.chols, self.alloc):
            a.setflags(write=False)

    @property
    def t(self):
        return self.weights.shape[0]

    @property
    def k(self):
        return self.weights.shape[1]

    @property
    def n(self):
        return self.alloc.shape[1]

    @property
    def p(self):
        return self.means.shape[2]

    def __len__(self):
        return self.t

    def __getitem__(self, t):
        return MixtureDraw(self.weights[t], self.means[t], self.chols[t], self.alloc[t])

    def __iter__(self):
        for t in range(self.t):
            yield self[t]

    @classmethod
    def from_draws(cls, draws):
        draws = list(draws)
        return cls(np.array([d.weights for d in draws]), np.array([d.means for d in draws]),
                   np.array([d.chols for d in draws]), np.array([d.alloc for d in draws]))


# ---------------------------------------------------------------------------
# sampler internals


@dataclass
class _State:
    weights: np.ndarray
    means: np.ndarray
    chols: np.ndarray
    alloc: np.ndarray = field(default=None)


def _batched_chol(mats, what):
    try:
        return np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        raise DegenerateChainError("Cholesky factorization failed for %s" % what) from None


def _component_loglik(x, means, chols):
    """``log N(x_i; mu_k, Sigma_k)`` as an (n, K) array."""
    p = x.shape[1]
    inv_chols = np.linalg.inv(chols)
    diff = x[:, None, :] - means[None, :, :]
    z = np.einsum("kab,nkb->nka", inv_chols, diff)
    maha = np.einsum("nka,nka->nk", z, z)
    logdet = 2.0 * np.sum(np.log(np.diagonal(chols, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (maha + logdet[None, :] + p * _LOG_2PI)


def _sample_categorical(logp, rng):
    logp = logp - logp.max(axis=1, keepdims=True)
    prob = np.exp(logp)
    cum = np.cumsum(prob, axis=1)
    u = rng.random(logp.shape[0]) * cum[:, -1]
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, logp.shape[1] - 1)


def _sample_dirichlet(conc, rng):
    g = rng.standard_gamma(conc)
    total = g.sum()
    if total <= 0:
        # every gamma variate underflowed; fall back to the largest concentration
        g = (conc == conc.max()).astype(np.float64)
        total = g.sum()
    return g / total


def _sample_inv_wishart_chol(nu, psi, rng):
    """Cholesky factors of ``K`` inverse-Wishart draws ``IW(nu_k, Psi_k)``.

    Uses the Bartlett decomposition of ``W ~ Wishart(nu, Psi^{-1})`` and inverts.
    """
    k, p, _ = psi.shape
    scale_chol = _batched_chol(np.linalg.inv(psi), "posterior scale matrix")
    a = np.zeros((k, p, p))
    dof = nu[:, None] - np.arange(p)[None, :]
    diag = np.sqrt(rng.chisquare(dof))
    a[:, np.arange(p), np.arange(p)] = diag
    rows, cols = np.tril_indices(p, -1)
    if rows.size:
        a[:, rows, cols] = rng.standard_normal((k, rows.size))
    ca = scale_chol @ a
    wishart = ca @ np.swapaxes(ca, -1, -2)
    sigma = np.linalg.inv(wishart)
    sigma = 0.5 * (sigma + np.swapaxes(sigma, -1, -2))
    return _batched_chol(sigma, "sampled covariance")


def _update_components(x, alloc, prior, rng):
    k, p = prior.k, prior.dim
    onehot = np.zeros((x.shape[0], k))
    onehot[np.arange(x.shape[0]), alloc] = 1.0
    counts = onehot.sum(axis=0)
    sums = onehot.T @ x
    if prior.fixed_cov is not None:
        prec = np.linalg.inv(prior.fixed_cov)
        prior_prec = np.linalg.inv(prior.loc_cov)
        post_prec = prior_prec[None] + counts[:, None, None] * prec[None]
        post_cov = np.linalg.inv(post_prec)
        post_cov = 0.5 * (post_cov + np.swapaxes(post_cov, -1, -2))
        rhs = (prior_prec @ prior.mu)[None, :] + sums @ prec.T
        post_mean = np.einsum("kab,kb->ka", post_cov, rhs)
        post_chol = _batched_chol(post_cov, "location posterior covariance")
        means = post_mean + np.einsum("kab,kb->ka", post_chol, rng.standard_normal((k, p)))
        chols = np.broadcast_to(np.linalg.cholesky(prior.fixed_cov), (k, p, p)).copy()
        return means, chols
    safe = np.maximum(counts, 1.0)
    xbar = sums / safe[:, None]
    centered = x[:, None, :] - xbar[None, :, :]
    scatter = np.einsum("nk,nka,nkb->kab", onehot, centered, centered)
    kappa_n = prior.kappa + counts
    nu_n = prior.nu + counts
    dev = xbar - prior.mu[None, :]
    shrink = (prior.kappa * counts / kappa_n)[:, None, None]
    psi_n = prior.psi[None] + scatter + shrink * np.einsum("ka,kb->kab", dev, dev)
    psi_n = 0.5 * (psi_n + np.swapaxes(psi_n, -1, -2))
    mu_n = (prior.kappa * prior.mu[None, :] + sums) / kappa_n[:, None]
    chols = _sample_inv_wishart_chol(nu_n, psi_n, rng)
    z = rng.standard_normal((k, p))
    means = mu_n + np.einsum("kab,kb->ka", chols, z) / np.sqrt(kappa_n)[:, None]
    return means, chols


def _sweep(x, state, prior, rng):
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights)
    logp = logw[None, :] + _component_loglik(x, state.means, state.chols)
    state.alloc = _sample_categorical(logp, rng)
    counts = np.bincount(state.alloc, minlength=prior.k)
    assert counts.sum() == x.shape[0]
    state.weights = _sample_dirichlet(prior.alpha + counts, rng)
    state.means, state.chols = _update_components(x, state.alloc, prior, rng)
    return state


def _initial_state(x, prior, rng):
    n, p = x.shape
    k = prior.k
    means = x[rng.choice(n, size=k, replace=n < k)].copy()
    if prior.fixed_cov is not None:
        cov = prior.fixed_cov
    elif prior.nu > p + 1:
        cov = prior.psi / (prior.nu - p - 1)
    else:
        cov = prior.psi
    chols = np.broadcast_to(np.linalg.cholesky(cov), (k, p, p)).copy()
    return _State(np.full(k, 1.0 / k), means, chols)


def run_gibbs(x, prior, cfg, progress=None):
    """Run one Gibbs chain and return the retained draws.

    Parameters
    ----------
    x : (n, p) array
    prior : GmmPrior
    cfg : ChainConfig
    progress : callable, optional
        Called as ``progress(sweep)`` after each sweep.

    Returns
    -------
    PosteriorSamples
    """
    x = check_data(x)
    if x.shape[1] != prior.dim:
        raise ValueError("data dimension %d does not match prior dimension %d" % (x.shape[1], prior.dim))
    rng = np.random.default_rng(cfg.seed)
    state = _initial_state(x, prior, rng)
    t_keep = cfg.n_retained
    n, p, k = x.shape[0], prior.dim, prior.k
    weights = np.empty((t_keep, k))
    means = np.empty((t_keep, k, p))
    chols = np.empty((t_keep, k, p, p))
    alloc = np.empty((t_keep, n), dtype=np.intp)
    j = 0
    for sweep in range(cfg.iterations):
        _sweep(x, state, prior, rng)
        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
            weights[j] = state.weights
            means[j] = state.means
            chols[j] = state.chols
            alloc[j] = state.alloc
            j += 1
        if progress is not None:
            progress(sweep)
    return PosteriorSamples(weights, means, chols, alloc)


def sample_prior_parameters(prior, rng):
    """Draw ``(weights, means, chols)`` from the prior."""
    k, p = prior.k, prior.dim
    weights = _sample_dirichlet(np.full(k, float(prior.alpha)), rng)
    empty = np.zeros(0, dtype=np.intp)
    means, chols = _update_components(np.zeros((0, p)), empty, prior, rng)
    return weights, means, chols


def sample_from_model(weights, means, chols, n, rng):
    """Draw allocations and observations from a mixture with the given parameters."""
    with np.errstate(divide="ignore"):
        logw = np.log(np.broadcast_to(weights, (n, weights.size)))
    alloc = _sample_categorical(logw, rng)
    z = rng.standard_normal((n, means.shape[1]))
    x = means[alloc] + np.einsum("nab,nb->na", chols[alloc], z)
    return alloc, x


# ---------------------------------------------------------------------------
# draw files


def save_draws(path, samples):
    """Write draws as a columnar CSV file.

    Layout: two comment lines (format tag, then ``n=.. k=.. p=.. t=..``), a
    header row, and one row per retained draw with columns ``w_k`` (weights),
    ``mu_k_a`` (means), ``L_k_a_b`` for ``a >= b`` (lower Cholesky factors of
    the covariances) and ``s_i`` (allocations).  Floats are written with
    ``repr`` so values reload bit-for-bit.
    """
    t, k, p, n = samples.t, samples.k, samples.p, samples.n
    rows, cols = np.tril_indices(p)
    header = ["w_%d" % j for j in range(k)]
    header += ["mu_%d_%d" % (j, a) for j in range(k) for a in range(p)]
    header += ["L_%d_%d_%d" % (j, a, b) for j in range(k) for a, b in zip(rows, cols)]
    header += ["s_%d" % i for i in range(n)]
    with open(path, "w", newline="\n") as fh:
        fh.write(DRAWS_MAGIC + "\n")
        fh.write("# n=%d k=%d p=%d t=%d\n" % (n, k, p, t))
        fh.write(",".join(header) + "\n")
        for i in range(t):
            floats = np.concatenate([samples.weights[i], samples.means[i].ravel(),
                                     samples.chols[i][:, rows, cols].ravel()])
            fh.write(",".join(map(repr, floats.tolist())))
            fh.write(",")
            fh.write(",".join(map(str, samples.alloc[i].tolist())))
            fh.write("\n")


def load_draws(path):
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if magic != DRAWS_MAGIC:
            raise ValueError("%s is not a draws file" % path)
        meta = dict(item.split("=") for item in fh.readline()[1:].split())
        n, k, p, t = (int(meta[key]) for key in ("n", "k", "p", "t"))
        fh.readline()
        body = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if len(body) != t:
        raise ValueError("expected %d draws, found %d" % (t, len(body)))
    ntri = p * (p + 1) // 2
    nf = k + k * p + k * ntri
    floats = np.array([[float(v) for v in row[:nf]] for row in body]).reshape(t, nf)
    alloc = np.array([[int(v) for v in row[nf:]] for row in body], dtype=np.intp).reshape(t, n)
    weights = floats[:, :k]
    means = floats[:, k:k + k * p].reshape(t, k, p)
    chols = np.zeros((t, k, p, p))
    rows, cols = np.tril_indices(p)
    chols[:, :, rows, cols] = floats[:, k + k * p:].reshape(t, k, ntri)
    return PosteriorSamples(weights, means, chols, alloc)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
