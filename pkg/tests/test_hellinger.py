import numpy as np
import pytest
from scipy import integrate, stats

from foldclust.gibbs import ChainConfig, GaussianKernel, GmmPrior, MixtureDraw, PosteriorSamples, run_gibbs
from foldclust.hellinger import (allocation_split_frequency, check_delta, delta_violations, estimate_delta,
                                 hellinger_gaussian, kernel_distance_matrix, per_draw_distance_matrix,
                                 read_delta_bin, read_delta_csv, write_delta_bin, write_delta_csv)


def quad_hellinger_1d(m1, s1, m2, s2):
    f = lambda x: 0.5 * (np.sqrt(stats.norm.pdf(x, m1, s1)) - np.sqrt(stats.norm.pdf(x, m2, s2))) ** 2  # noqa
    lo = min(m1 - 40 * s1, m2 - 40 * s2)
    hi = max(m1 + 40 * s1, m2 + 40 * s2)
    val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12,
                            points=[m1, m2])
    return np.sqrt(val)


def random_chol(rng, p):
    a = rng.normal(size=(p, p))
    return np.linalg.cholesky(a @ a.T + 0.3 * np.eye(p))


def test_identical_kernels_have_zero_distance():
    g = GaussianKernel([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
    assert hellinger_gaussian(g, g) == 0.0


def test_unit_variance_shift_value():
    # frozen from quadrature: sqrt(1 - exp(-1/8))
    g1, g2 = GaussianKernel([0.0], [[1.0]]), GaussianKernel([1.0], [[1.0]])
    expected = np.sqrt(1.0 - np.exp(-1.0 / 8.0))
    assert hellinger_gaussian(g1, g2) == pytest.approx(expected, abs=1e-15)
    assert quad_hellinger_1d(0.0, 1.0, 1.0, 1.0) == pytest.approx(expected, abs=1e-9)


def test_equal_quarter_identity_covariance_gives_pure_exponential():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m1, m2 = rng.normal(size=2), rng.normal(size=2)
        h = hellinger_gaussian(GaussianKernel(m1, 0.25 * np.eye(2)), GaussianKernel(m2, 0.25 * np.eye(2)))
        assert 1.0 - h ** 2 == pytest.approx(np.exp(-0.5 * np.sum((m1 - m2) ** 2)), abs=1e-13)


def test_symmetric_and_matches_quadrature_in_one_dimension():
    rng = np.random.default_rng(1)
    for _ in range(25):
        m1, m2 = rng.normal(0, 2, size=2)
        s1, s2 = rng.uniform(0.3, 3.0, size=2)
        g1, g2 = GaussianKernel([m1], [[s1 ** 2]]), GaussianKernel([m2], [[s2 ** 2]])
        assert hellinger_gaussian(g1, g2) == hellinger_gaussian(g2, g1)
        assert hellinger_gaussian(g1, g2) == pytest.approx(quad_hellinger_1d(m1, s1, m2, s2), abs=1e-6)


def test_saturation_for_far_kernels():
    g1 = GaussianKernel([0.0, 0.0], np.eye(2))
    g2 = GaussianKernel([100.0, 0.0], np.eye(2))
    assert hellinger_gaussian(g1, g2) == pytest.approx(1.0, abs=1e-6)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        hellinger_gaussian(GaussianKernel([0.0], [[1.0]]), GaussianKernel([0.0, 0.0], np.eye(2)))


def test_kernel_matrix_matches_pairwise_calls():
    rng = np.random.default_rng(2)
    means = rng.normal(size=(5, 3))
    chols = np.array([random_chol(rng, 3) for _ in range(5)])
    h = kernel_distance_matrix(means, chols)
    for a in range(5):
        for b in range(5):
            ga = GaussianKernel(means[a], chols[a] @ chols[a].T)
            gb = GaussianKernel(means[b], chols[b] @ chols[b].T)
            assert h[a, b] == pytest.approx(hellinger_gaussian(ga, gb), abs=1e-14)


def make_draw(alloc, means, covs, weights=None):
    k = len(means)
    weights = np.full(k, 1.0 / k) if weights is None else weights
    return MixtureDraw.from_kernels(weights, [GaussianKernel(m, c) for m, c in zip(means, covs)], alloc)


def test_per_draw_matrix_structure():
    one = make_draw([0, 0, 0], [[0.0]], [[[1.0]]])
    assert np.array_equal(per_draw_distance_matrix(one), np.zeros((3, 3)))
    two = make_draw([0, 0, 1], [[0.0], [1.0]], [[[1.0]], [[2.0]]])
    d = per_draw_distance_matrix(two)
    assert len(np.unique(d[np.triu_indices(3, 1)][d[np.triu_indices(3, 1)] > 0])) == 1
    assert d[0, 1] == 0.0 and d[0, 2] == d[1, 2] > 0
    far = make_draw([0, 1], [[0.0, 0.0], [50.0, 50.0]], [np.eye(2), np.eye(2)])
    assert per_draw_distance_matrix(far)[0, 1] == pytest.approx(1.0, abs=1e-6)


def naive_delta(samples):
    """O(T n^2) double loop over observation pairs."""
    n = samples.n
    acc = np.zeros((n, n))
    for draw in samples:
        covs = draw.covs
        for i in range(n):
            for j in range(n):
                a, b = draw.alloc[i], draw.alloc[j]
                acc[i, j] += hellinger_gaussian(GaussianKernel(draw.means[a], covs[a]),
                                                GaussianKernel(draw.means[b], covs[b]))
    return acc / samples.t


def test_estimate_matches_naive_loop():
    x = np.random.default_rng(3).normal(size=(12, 2)) * 2
    s = run_gibbs(x, GmmPrior.default(2, k=4), ChainConfig(40, 30, 1, 1))
    assert s.t == 10
    assert np.max(np.abs(estimate_delta(s) - naive_delta(s))) < 1e-12
    assert np.array_equal(estimate_delta(s, chunk=3), estimate_delta(s, chunk=3, n_jobs=4))
    assert np.max(np.abs(estimate_delta(s, chunk=3) - estimate_delta(s))) < 1e-12


def test_two_hand_built_draws():
    k1 = ([[0.0], [1.0]], [[[1.0]], [[1.0]]])
    k2 = ([[0.0], [2.0]], [[[1.0]], [[4.0]]])
    d1 = make_draw([0, 1, 1], *k1)
    d2 = make_draw([0, 1, 0], *k2)
    s = PosteriorSamples.from_draws([d1, d2])
    delta = estimate_delta(s)
    h1 = quad_hellinger_1d(0.0, 1.0, 1.0, 1.0)
    h2 = quad_hellinger_1d(0.0, 1.0, 2.0, 2.0)
    assert delta[0, 1] == pytest.approx((h1 + h2) / 2, abs=1e-9)
    assert delta[0, 2] == pytest.approx(h1 / 2, abs=1e-9)
    assert delta[1, 2] == pytest.approx(h2 / 2, abs=1e-9)
    single = estimate_delta(PosteriorSamples.from_draws([d1]))
    assert np.array_equal(single, per_draw_distance_matrix(d1))


def test_always_together_gives_zero():
    d = make_draw([1, 1, 0], [[0.0], [3.0]], [[[1.0]], [[1.0]]])
    e = make_draw([0, 0, 1], [[0.0], [3.0]], [[[1.0]], [[1.0]]])
    delta = estimate_delta(PosteriorSamples.from_draws([d, e]))
    assert delta[0, 1] == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_chain_delta_invariants_and_split_bound(seed):
    x = np.random.default_rng(seed).normal(size=(40, 2)) * 3
    s = run_gibbs(x, GmmPrior.default(2, k=8), ChainConfig(200, 50, 3, seed))
    delta = estimate_delta(s)
    check_delta(delta)
    assert np.all(delta <= allocation_split_frequency(s))


def test_violations_detected():
    bad = np.array([[0.0, 0.1, 0.9], [0.1, 0.0, 0.1], [0.9, 0.1, 0.0]])
    assert delta_violations(bad)["triangle"] == pytest.approx(0.7)
    with pytest.raises(ValueError):
        check_delta(bad)
    with pytest.raises(ValueError):
        check_delta(np.zeros((2, 3)))


def test_matrix_files_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    d = rng.uniform(size=(7, 7))
    d = (d + d.T) / 3
    np.fill_diagonal(d, 0.0)
    write_delta_csv(tmp_path / "d.csv", d)
    write_delta_bin(tmp_path / "d.bin", d)
    assert np.array_equal(read_delta_csv(tmp_path / "d.csv"), d)
    assert np.array_equal(read_delta_bin(tmp_path / "d.bin"), d)
    raw = (tmp_path / "d.bin").read_bytes()
    assert raw[:8] == b"FOLDDMAT" and int.from_bytes(raw[8:16], "little") == 7
    assert len(raw) == 16 + 8 * 49
    (tmp_path / "x.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        read_delta_bin(tmp_path / "x.bin")
