"""Uncertainty around a fused clustering: per-draw minimizers and a 95% credible ball.

Run:  python demos/credible_ball.py
"""
import numpy as np

from foldclust import (ChainConfig, GmmPrior, credible_ball, estimate_delta, fold_psm, gen_gaussian_mixture,
                       omega_avg, per_draw_minimizers, point_estimate, run_gibbs)
from foldclust.partitions import vi_distance


def main():
    data = gen_gaussian_mixture(n=150, seed=2)
    samples = run_gibbs(data.x, GmmPrior.default(2), ChainConfig(3000, 1000, 4, seed=2))
    delta = estimate_delta(samples)
    params = omega_avg(delta)
    center = point_estimate(delta, params).labels
    draws_c = per_draw_minimizers(samples, params)
    ball = credible_ball(center, draws_c, 0.95)
    print("point estimate: %d clusters; %d draws" % (center.max() + 1, len(draws_c)))
    print("ball radius (VI) %.3f, coverage %.3f" % (ball.radius, ball.coverage))
    print("horizontal bound sizes:", sorted({int(c.max()) + 1 for c in ball.horizontal}))
    print("vertical upper sizes:", sorted({int(c.max()) + 1 for c in ball.vertical_upper}))
    print("vertical lower sizes:", sorted({int(c.max()) + 1 for c in ball.vertical_lower}))
    print("truth inside horizontal reach:", ball.covers_by_horizontal(data.truth),
          "(VI to truth %.3f)" % vi_distance(center, data.truth))
    psm = fold_psm(draws_c)
    print("share of pairs with uncertain co-clustering (0.1 < psm < 0.9): %.3f"
          % np.mean((psm > 0.1) & (psm < 0.9)))


if __name__ == "__main__":
    main()
