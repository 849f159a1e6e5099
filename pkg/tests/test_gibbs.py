import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from foldclust.gibbs import (ChainConfig, GaussianKernel, GmmPrior, MixtureDraw, PosteriorSamples,
                             _sample_dirichlet, _sample_inv_wishart_chol, check_data, file_sha256,
                             load_draws, localized_params, run_gibbs, save_draws)
from foldclust.oracle import WELL_MEANS, four_wells_oracle, sample_oracle


def small_chain(seed=0, n=40, k=3, iterations=60):
    x = np.random.default_rng(seed).normal(size=(n, 2))
    return x, run_gibbs(x, GmmPrior.default(2, k=k), ChainConfig(iterations, 10, 2, seed))


def test_check_data_rejects_bad_input():
    with pytest.raises(ValueError):
        check_data([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError):
        check_data([[1.0, 2.0]])
    assert check_data([1.0, 2.0, 3.0]).shape == (3, 1)


def test_kernel_validation():
    with pytest.raises(ValueError):
        GaussianKernel([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(np.linalg.LinAlgError):
        GaussianKernel([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_prior_validation():
    with pytest.raises(ValueError):
        GmmPrior(k=0, alpha=1.0, mu=[0.0])
    with pytest.raises(ValueError):
        GmmPrior(k=2, alpha=1.0, mu=[0.0, 0.0], nu=0.5)
    with pytest.raises(ValueError):
        GmmPrior(k=2, alpha=1.0, mu=[0.0], psi=[[-1.0]])
    p = GmmPrior.default(3)
    assert (p.k, p.alpha, p.nu, p.kappa) == (30, 0.5, 5.0, 1.0)
    assert GmmPrior.from_dict(p.to_dict()).to_dict() == p.to_dict()


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(10, 10, 1)
    with pytest.raises(ValueError):
        ChainConfig(10, 2, 0)
    assert ChainConfig(9000, 1000, 3).n_retained == 2667


def test_localized_params_lookup():
    a = GaussianKernel([0.0], [[1.0]])
    b = GaussianKernel([5.0], [[2.0]])
    draw = MixtureDraw.from_kernels([0.5, 0.5], [a, b], [1, 0])
    assert np.allclose(localized_params(draw, 0).mean, b.mean)
    assert np.allclose(localized_params(draw, 0).cov, b.cov)
    same = MixtureDraw.from_kernels([0.5, 0.5], [a, b], [0, 0])
    g0, g1 = localized_params(same, 0), localized_params(same, 1)
    assert np.array_equal(g0.mean, g1.mean) and np.array_equal(g0.cov, g1.cov)


def test_draw_invariants():
    with pytest.raises(ValueError):
        MixtureDraw(np.array([0.5, 0.6]), np.zeros((2, 1)), np.ones((2, 1, 1)), np.array([0]))
    with pytest.raises(ValueError):
        MixtureDraw(np.array([0.5, 0.5]), np.zeros((2, 1)), np.ones((2, 1, 1)), np.array([2]))


def test_chain_shapes_simplex_and_localized_lookup():
    x, s = small_chain()
    assert s.t == ChainConfig(60, 10, 2).n_retained == 25
    assert (s.k, s.n, s.p) == (3, 40, 2)
    assert np.all(np.abs(s.weights.sum(axis=1) - 1.0) < 1e-10)
    assert np.all(s.weights >= 0)
    draw = s[3]
    for i in range(s.n):
        g = localized_params(draw, i)
        assert np.array_equal(g.mean, draw.means[draw.alloc[i]])


def test_seed_reproducibility():
    _, a = small_chain(seed=5)
    _, b = small_chain(seed=5)
    _, c = small_chain(seed=6)
    for name in ("weights", "means", "chols", "alloc"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.means, c.means)


def test_samples_are_read_only():
    _, s = small_chain()
    with pytest.raises(ValueError):
        s.means[0, 0, 0] = 1.0


def test_draw_file_round_trip(tmp_path):
    _, s = small_chain()
    path = tmp_path / "draws.csv"
    save_draws(path, s)
    back = load_draws(path)
    for name in ("weights", "means", "chols", "alloc"):
        assert np.array_equal(getattr(back, name), getattr(s, name))
    save_draws(tmp_path / "again.csv", back)
    assert file_sha256(path) == file_sha256(tmp_path / "again.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("not a draw file\n")
    with pytest.raises(ValueError):
        load_draws(bad)


def test_from_draws_matches_indexing():
    _, s = small_chain()
    rebuilt = PosteriorSamples.from_draws(list(s))
    assert np.array_equal(rebuilt.chols, s.chols)


def test_single_component_posterior_mean():
    # conjugate update: E[mu | x] = (kappa mu0 + n xbar) / (kappa + n)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(200, 2))
    prior = GmmPrior(k=1, alpha=1.0, mu=np.zeros(2), kappa=1.0, nu=4.0, psi=np.eye(2))
    s = run_gibbs(x, prior, ChainConfig(2000, 200, 1, 3))
    post_mean = s.means[:, 0, :].mean(axis=0)
    expected = 200 * x.mean(axis=0) / 201.0
    se = x.std(axis=0, ddof=1) / np.sqrt(200)
    assert np.all(np.abs(post_mean - expected) < 3 * se)
    assert np.all(np.abs(post_mean - x.mean(axis=0)) < 3 * se)


def test_symmetric_dirichlet_weights_average_half():
    rng = np.random.default_rng(0)
    draws = np.array([_sample_dirichlet(np.array([2.0, 2.0]), rng) for _ in range(20000)])
    assert np.allclose(draws.sum(axis=1), 1.0)
    # Beta(2, 2) has variance 1/20
    assert abs(draws[:, 0].mean() - 0.5) < 4 * np.sqrt(0.05 / 20000)


def test_tiny_concentration_dirichlet_stays_on_simplex():
    rng = np.random.default_rng(1)
    for _ in range(200):
        w = _sample_dirichlet(np.full(30, 1e-3), rng)
        assert abs(w.sum() - 1.0) < 1e-10 and np.all(w >= 0)


def test_inverse_wishart_mean():
    rng = np.random.default_rng(2)
    psi = np.array([[2.0, 0.3], [0.3, 1.0]])
    nu = 7.0
    chols = _sample_inv_wishart_chol(np.full(20000, nu), np.broadcast_to(psi, (20000, 2, 2)), rng)
    mean = (chols @ np.swapaxes(chols, -1, -2)).mean(axis=0)
    assert np.allclose(mean, psi / (nu - 3.0), atol=0.03)


def test_location_model_recovers_four_wells():
    oracle = four_wells_oracle()
    x, _ = sample_oracle(oracle, 1000, np.random.default_rng(0))
    prior = GmmPrior.location(0.25 * np.eye(2), k=4, alpha=0.25)
    s = run_gibbs(x, prior, ChainConfig(2000, 1000, 2, 0))
    occupied = np.bincount(s.alloc[-1], minlength=4) > 0
    assert occupied.all()
    # align component labels to the true means in every draw before averaging
    truth = np.array(WELL_MEANS)
    aligned = np.empty((s.t, 4, 2))
    for t in range(s.t):
        cost = np.linalg.norm(s.means[t][:, None, :] - truth[None, :, :], axis=2)
        rows, cols = linear_sum_assignment(cost)
        aligned[t, cols] = s.means[t][rows]
    post = aligned.mean(axis=0)
    assert np.all(np.linalg.norm(post - truth, axis=1) < 0.2)
    assert np.allclose(s.chols, np.linalg.cholesky(0.25 * np.eye(2)))
