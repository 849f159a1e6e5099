import numpy as np
import pytest

from foldclust.optimize import average_linkage_path, best_on_path
from foldclust.partitions import LossParams
from foldclust.risk import merge_gain, mean_cross_distance, should_merge
from foldclust.tuning import (DegenerateDistanceError, ElbowPoint, default_omega_grid, elbow_curve,
                              gamma_avg, omega_avg, path_within_sums, read_elbow_csv, write_elbow_csv)

from .helpers import block_delta, random_delta


def constant_delta(n, value):
    d = np.full((n, n), value)
    np.fill_diagonal(d, 0.0)
    return d


def test_omega_avg_examples():
    assert omega_avg(constant_delta(5, 0.5)).omega == pytest.approx(1.0)
    assert omega_avg(constant_delta(4, 0.2)).gamma == pytest.approx(0.2)
    d = np.array([[0, .2, .9], [.2, 0, .8], [.9, .8, 0]])
    assert gamma_avg(d) == pytest.approx(1.9 / 3)


def test_omega_avg_degenerate_inputs():
    with pytest.raises(DegenerateDistanceError):
        omega_avg(np.zeros((4, 4)))
    with pytest.raises(DegenerateDistanceError):
        omega_avg(constant_delta(4, 1.0))
    with pytest.raises(ValueError):
        omega_avg(np.zeros((1, 1)))


def three_group_delta(m, eps, delta):
    """Three equal groups; distance 0 inside, ``eps`` between groups 0-1, ``delta`` otherwise."""
    g = np.repeat(np.arange(3), m)
    table = np.array([[0, eps, delta], [eps, 0, delta], [delta, delta, 0]])
    d = table[g[:, None], g[None, :]]
    np.fill_diagonal(d, 0.0)
    return d, g


@pytest.mark.parametrize("ratio", [0.4, 0.5, 0.54, 0.6, 0.7, 0.9])
def test_three_group_merge_threshold_at_four_sevenths(ratio):
    delta = 0.8
    eps = ratio * delta
    d, g = three_group_delta(300, eps, delta)
    params = omega_avg(d)
    assert params.gamma == pytest.approx(2 / 9 * eps + 4 / 9 * delta, rel=5e-3)
    assert should_merge(g, 0, 1, d, params) == (ratio < 4 / 7)
    # the far groups never merge
    assert not should_merge(g, 0, 2, d, params)


@pytest.mark.parametrize("seed", range(10))
def test_averaged_gamma_is_the_merge_threshold(seed):
    d = random_delta(20, seed)
    params = omega_avg(d)
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 4, 20)
    for h1, h2 in [(0, 1), (1, 2), (2, 3)]:
        if not (np.any(c == h1) and np.any(c == h2)):
            continue
        mean = mean_cross_distance(c, h1, h2, d)
        assert (merge_gain(c, h1, h2, d, params) > 0) == (mean < gamma_avg(d))


def test_elbow_limits():
    d = random_delta(15, 0)
    pts = elbow_curve(d, [1e-9, 1e9])
    assert (pts[0].k_star, pts[0].r_omega) == (15, 0.0)
    assert (pts[1].k_star, pts[1].r_omega) == (1, 1.0)
    with pytest.raises(ValueError):
        elbow_curve(d, [])


def test_elbow_on_blocks_reaches_block_partition():
    d, _ = block_delta([5, 5, 5], 0.1, 0.9)
    pts = elbow_curve(d, [0.5, 1.0, 2.0])
    assert pts[1].k_star == 3
    within = 3 * 10 * 0.1
    total = within + 75 * 0.9
    assert pts[1].r_omega == pytest.approx(within / total)


@pytest.mark.parametrize("seed", range(20))
def test_elbow_monotone_along_one_path(seed):
    d = random_delta(30, 1000 + seed)
    path = average_linkage_path(d)
    pts = elbow_curve(d, np.geomspace(1e-3, 1e3, 80), path=path)
    rs = [p.r_omega for p in pts]
    ks = [p.k_star for p in pts]
    assert all(b >= a - 1e-12 for a, b in zip(rs[:-1], rs[1:]))
    assert all(b <= a for a, b in zip(ks[:-1], ks[1:]))
    for p in pts:
        assert 0.0 <= p.r_omega <= 1.0
        assert p.k_star == best_on_path(path, d, p.omega).max() + 1


def test_path_within_sums_one_merge_increment():
    d = random_delta(12, 3)
    path = average_linkage_path(d)
    within = path_within_sums(path, d)
    assert within[0] == 0.0
    assert within[-1] == pytest.approx(d[np.triu_indices(12, 1)].sum())
    for level in range(1, len(path)):
        c = path.clusterings[level]
        direct = sum(d[i, j] for i in range(12) for j in range(i + 1, 12) if c[i] == c[j])
        assert within[level] == pytest.approx(direct, abs=1e-12)


def test_zero_matrix_elbow_convention():
    pts = elbow_curve(np.zeros((4, 4)), [1.0])
    assert pts[0] == ElbowPoint(1.0, 1, 1.0)


def test_default_grid_thresholds_inside_unit_interval():
    grid = default_omega_grid(random_delta(30, 4))
    assert grid.size > 10
    gammas = grid / (1 + grid)
    assert np.all((gammas > 0) & (gammas < 1)) and np.all(np.diff(grid) > 0)


def test_elbow_csv_round_trip(tmp_path):
    pts = elbow_curve(random_delta(10, 5))
    write_elbow_csv(tmp_path / "e.csv", pts)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "omega,k,r_omega"
    assert read_elbow_csv(tmp_path / "e.csv") == pts


def test_loss_params_round_trip():
    p = LossParams.from_gamma(0.75)
    assert p.omega == pytest.approx(3.0)
