"""Two interlocking arcs fitted with many small Gaussians, then fused back into two clusters.

Run:  python demos/moons.py [iterations]
"""
import sys

import numpy as np

from foldclust import (ChainConfig, GmmPrior, adjusted_rand_index, average_linkage_path, elbow_curve,
                       estimate_delta, gen_moons, omega_avg, point_estimate, run_gibbs)


def main(iterations=6000):
    data = gen_moons(500, noise_sd=0.1, seed=0)
    prior = GmmPrior.location(0.02 * np.eye(2), k=30, alpha=1 / 30, loc_cov=2 * np.eye(2))
    samples = run_gibbs(data.x, prior, ChainConfig(iterations, iterations // 4, 4, seed=0))
    occupied = [np.unique(a).size for a in samples.alloc]
    print("occupied components per draw: median %d" % np.median(occupied))

    delta = estimate_delta(samples)
    path = average_linkage_path(delta)
    two = path.labels[len(path) - 2]
    print("two-cluster candidate on the merge path: ARI %.3f" % adjusted_rand_index(two, data.truth))

    print("\n  omega      K   r")
    points = elbow_curve(delta, path=path)
    for p in points:
        if p.k_star <= 12:
            print("%8.3g  %3d  %.3f" % (p.omega, p.k_star, p.r_omega))

    # the knee: the last K before the within-cluster share jumps to 1
    knee = min((p for p in points if p.k_star == 2), key=lambda p: p.omega)
    est = point_estimate(delta, knee.omega)
    print("\nelbow choice omega=%.3g: K=%d, ARI %.3f" % (knee.omega, est.k, adjusted_rand_index(est.labels, data.truth)))
    avg = point_estimate(delta, omega_avg(delta))
    print("averaged omega: K=%d, ARI %.3f" % (avg.k, adjusted_rand_index(avg.labels, data.truth)))


if __name__ == "__main__":
    main(*map(int, sys.argv[1:2]))
