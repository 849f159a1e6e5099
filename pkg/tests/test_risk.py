import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foldclust.gibbs import MixtureDraw
from foldclust.hellinger import per_draw_distance_matrix
from foldclust.partitions import LossParams, canonicalize, merge_clusters
from foldclust.risk import (binder_decomposition, fold_loss, mean_cross_distance, merge_gain, risk_report,
                            should_merge)

from .helpers import random_delta, random_draw

D3 = np.array([[0, .2, .9], [.2, 0, .8], [.9, .8, 0]])


def loss_by_pairs(c, d, omega):
    total = 0.0
    for i, j in itertools.combinations(range(len(c)), 2):
        total += d[i, j] if c[i] == c[j] else omega * (1 - d[i, j])
    return total


def test_hand_example():
    assert fold_loss([0, 0, 1], D3, 1.0) == pytest.approx(0.5)
    assert fold_loss([0, 0, 0], D3, 3.0) == pytest.approx(1.9)


def test_singletons_approach_zero_for_small_omega():
    d = random_delta(8, 0)
    singles = np.arange(8)
    assert fold_loss(singles, d, 1e-9) < 1e-6
    for c in ([0] * 8, [0, 0, 1, 1, 2, 2, 3, 3]):
        assert fold_loss(c, d, 1e-9) > fold_loss(singles, d, 1e-9)


def test_size_mismatch():
    with pytest.raises(ValueError):
        fold_loss([0, 1], D3, 1.0)


def test_risk_report():
    r = risk_report([0, 0, 1], D3, LossParams(1.0))
    assert r.n_pairs == 3 and r.omega == 1.0
    assert r.normalized == pytest.approx(0.5 / 3)


@settings(max_examples=100)
@given(st.integers(2, 12), st.integers(0, 10 ** 6), st.floats(0.05, 20.0))
def test_loss_matches_pairs_and_is_permutation_invariant(n, seed, omega):
    rng = np.random.default_rng(seed)
    d = random_delta(n, seed)
    c = rng.integers(0, 4, n)
    assert fold_loss(c, d, omega) == pytest.approx(loss_by_pairs(c, d, omega), rel=1e-12, abs=1e-12)
    assert fold_loss(canonicalize(c), d, omega) == fold_loss(c, d, omega)
    perm = rng.permutation(n)
    assert fold_loss(c[perm], d[np.ix_(perm, perm)], omega) == pytest.approx(fold_loss(c, d, omega), rel=1e-12)


def test_merge_gain_examples():
    d = np.array([[0.0, 0.3], [0.3, 0.0]])
    assert merge_gain([0, 1], 0, 1, d, 1.0) == pytest.approx(0.4)
    ones = np.ones((4, 4)) - np.eye(4)
    assert merge_gain([0, 0, 1, 1], 0, 1, ones, 2.0) == -4.0
    gamma = 0.25
    boundary = np.full((3, 3), gamma)
    np.fill_diagonal(boundary, 0.0)
    assert merge_gain([0, 1, 1], 0, 1, boundary, LossParams.from_gamma(gamma)) == pytest.approx(0.0, abs=1e-15)
    assert not should_merge([0, 1, 1], 0, 1, boundary, LossParams(1 / 3))
    with pytest.raises(ValueError):
        merge_gain([0, 1], 0, 0, d, 1.0)
    with pytest.raises(ValueError):
        merge_gain([0, 1], 0, 7, d, 1.0)


@settings(max_examples=100)
@given(st.integers(2, 12), st.integers(0, 10 ** 6), st.floats(0.05, 20.0))
def test_merge_gain_is_loss_difference_and_sign_matches_threshold(n, seed, omega):
    rng = np.random.default_rng(seed)
    d = random_delta(n, seed)
    c = canonicalize(rng.integers(0, 3, n))
    if c.max() < 1:
        return
    h1, h2 = 0, 1
    gain = merge_gain(c, h1, h2, d, omega)
    diff = fold_loss(c, d, omega) - fold_loss(merge_clusters(c, h1, h2), d, omega)
    assert gain == pytest.approx(diff, abs=1e-9)
    params = LossParams(omega)
    mean = mean_cross_distance(c, h1, h2, d)
    if abs(mean - params.gamma) > 1e-12:
        assert (gain > 0) == (mean < params.gamma) == should_merge(c, h1, h2, d, params)


@pytest.mark.parametrize("seed", range(25))
def test_binder_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(2, 13)), int(rng.integers(1, 5))
    draw = random_draw(rng, n, k)
    c = rng.integers(0, 4, n)
    omega = float(rng.uniform(0.2, 4.0))
    b, extra = binder_decomposition(c, draw, omega)
    assert b + extra == pytest.approx(fold_loss(c, per_draw_distance_matrix(draw), omega), abs=1e-9)


def test_binder_decomposition_separated_kernels():
    means = np.array([[0.0, 0.0], [500.0, 0.0], [0.0, 500.0]])
    chols = np.broadcast_to(np.eye(2), (3, 2, 2)).copy()
    alloc = np.array([0, 0, 1, 2, 2, 1])
    draw = MixtureDraw(np.full(3, 1 / 3), means, chols, alloc)
    b, extra = binder_decomposition(alloc, draw, 1.0)
    assert extra == 0.0 and b == 0.0


def test_binder_decomposition_single_component():
    draw = MixtureDraw(np.ones(1), np.zeros((1, 2)), np.eye(2)[None], np.zeros(5, dtype=int))
    c = [0, 0, 1, 1, 2]
    b, extra = binder_decomposition(c, draw, 2.5)
    split_pairs = 10 - 2
    assert b == pytest.approx(2.5 * split_pairs) and extra == 0.0
