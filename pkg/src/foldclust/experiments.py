"""Replicated simulation studies comparing point estimates against the truth."""

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, Sequence

import numpy as np

from .estimators import allocation_psm, binder_estimate, vi_estimate
from .gibbs import ChainConfig, GmmPrior, run_gibbs
from .hellinger import estimate_delta
from .optimize import GreedyConfig, point_estimate
from .partitions import adjusted_rand_index
from .simulate import generate
from .tuning import omega_avg

METHODS = ("fold", "binder", "vi")


@dataclass(frozen=True)
class ReplicateSpec:
    scenario: str = "skew-symmetric"
    n_grid: Sequence[int] = (100,)
    replications: int = 10
    methods: Sequence[str] = METHODS
    seed: int = 0
    iterations: int = 9000
    burn_in: int = 1000
    thin: int = 3
    k: int = 30
    alpha: float = 0.5
    restarts: int = 16
    prior: Dict = field(default_factory=dict)   # extra GmmPrior fields, e.g. fixed_cov

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError("unknown methods %s" % bad)
        if self.replications < 1 or not self.n_grid:
            raise ValueError("need at least one replication and one sample size")
        ChainConfig(self.iterations, self.burn_in, self.thin)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError("unknown experiment fields %s" % sorted(extra))
        d = dict(d)
        for key in ("n_grid", "methods"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["n_grid"] = list(self.n_grid)
        out["methods"] = list(self.methods)
        return out

    def make_prior(self, p):
        if self.prior.get("fixed_cov") is not None:
            return GmmPrior(k=self.k, alpha=self.alpha, mu=self.prior.get("mu", np.zeros(p)),
                            fixed_cov=self.prior["fixed_cov"], loc_cov=self.prior.get("loc_cov"))
        base = GmmPrior.default(p, self.k, self.alpha)
        return GmmPrior(k=self.k, alpha=self.alpha, mu=self.prior.get("mu", base.mu),
                        kappa=self.prior.get("kappa", base.kappa), nu=self.prior.get("nu", base.nu),
                        psi=self.prior.get("psi", base.psi))


def _seeds(spec, n, rep):
    children = np.random.SeedSequence([spec.seed, n, rep]).spawn(3)
    return [int(c.generate_state(1)[0]) for c in children]


def run_replication(spec, n, rep):
    """One data set, one chain, every requested estimate.  Returns a list of records."""
    data_seed, chain_seed, opt_seed = _seeds(spec, n, rep)
    data = generate(spec.scenario, n, data_seed)
    samples = run_gibbs(data.x, spec.make_prior(data.p),
                        ChainConfig(spec.iterations, spec.burn_in, spec.thin, chain_seed))
    greedy = GreedyConfig(restarts=spec.restarts, seed=opt_seed)
    estimates = {}
    if "fold" in spec.methods:
        delta = estimate_delta(samples)
        estimates["fold"] = point_estimate(delta, omega_avg(delta), greedy).labels
    if "binder" in spec.methods:
        estimates["binder"] = binder_estimate(allocation_psm(samples), greedy)
    if "vi" in spec.methods:
        estimates["vi"] = vi_estimate(samples)
    return [{"n": n, "replication": rep, "method": m,
             "ari": adjusted_rand_index(c, data.truth), "k": int(c.max()) + 1}
            for m, c in estimates.items()]


def replicate(spec, progress=None):
    records = []
    for n in spec.n_grid:
        for rep in range(spec.replications):
            recs = run_replication(spec, n, rep)
            records.extend(recs)
            if progress is not None:
                progress(recs)
    return records


def summarize(records):
    """Mean and sample standard deviation of ARI and cluster count per (n, method)."""
    rows = []
    keys = sorted({(r["n"], r["method"]) for r in records}, key=lambda k: (k[0], METHODS.index(k[1])))
    for n, method in keys:
        sel = [r for r in records if r["n"] == n and r["method"] == method]
        ari = np.array([r["ari"] for r in sel])
        k = np.array([r["k"] for r in sel], dtype=float)
        sd = (lambda v: float(v.std(ddof=1)) if v.size > 1 else 0.0)
        rows.append({"n": n, "method": method, "replications": len(sel),
                     "ari_mean": float(ari.mean()), "ari_sd": sd(ari),
                     "k_mean": float(k.mean()), "k_sd": sd(k)})
    return rows


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, ["n", "replication", "method", "ari", "k"], lineterminator="\n")
        out.writeheader()
        out.writerows(records)


def write_summary_csv(path, rows):
    """Table with one row per sample size and ``mean (sd)`` cells per method."""
    methods = [m for m in METHODS if any(r["method"] == m for r in rows)]
    header = ["n"] + ["%s_%s" % (m, q) for m in methods for q in ("ari", "k")]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for n in sorted({r["n"] for r in rows}):
            line = [n]
            for m in methods:
                r = next(r for r in rows if r["n"] == n and r["method"] == m)
                line += ["%.3f (%.3f)" % (r["ari_mean"], r["ari_sd"]),
                         "%.2f (%.3f)" % (r["k_mean"], r["k_sd"])]
            out.writerow(line)


def load_spec(path):
    with open(path) as fh:
        return ReplicateSpec.from_dict(json.load(fh))
