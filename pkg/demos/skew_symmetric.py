"""Skewed, non-Gaussian clusters: fused kernels against Binder and VI point estimates.

Run:  python demos/skew_symmetric.py [replications]
"""
import sys

from foldclust.experiments import ReplicateSpec, replicate, summarize


def main(replications=3):
    spec = ReplicateSpec(replications=replications, iterations=3000, burn_in=500)
    def show(recs):
        print("replication %d: " % recs[0]["replication"]
              + ", ".join("%s ARI %.3f K %d" % (r["method"], r["ari"], r["k"]) for r in recs), flush=True)

    records = replicate(spec, progress=show)
    print("\nmethod   ARI (sd)        K (sd)")
    for row in summarize(records):
        print("%-7s  %.3f (%.3f)   %.2f (%.2f)" % (row["method"], row["ari_mean"], row["ari_sd"],
                                                 row["k_mean"], row["k_sd"]))


if __name__ == "__main__":
    main(*map(int, sys.argv[1:2]))
