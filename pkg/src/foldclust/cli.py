"""Command-line pipeline: simulate, fit, cluster, elbow, uq, replicate, oracle-validate.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
numerical failures.
"""

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .estimators import allocation_psm, binder_estimate, vi_estimate
from .experiments import load_spec, replicate, summarize, write_records_csv, write_summary_csv
from .gibbs import (ChainConfig, DegenerateChainError, GmmPrior, PosteriorSamples, file_sha256, load_draws,
                    run_gibbs, save_draws)
from .hellinger import estimate_delta, read_delta_bin, read_delta_csv, write_delta_bin, write_delta_csv
from .optimize import GreedyConfig, point_estimate
from .oracle import ConvergenceConfig, summarize_convergence, validate_convergence, write_convergence_csv
from .partitions import LossParams, adjusted_rand_index, canonicalize
from .risk import risk_report
from .simulate import SCENARIOS, generate, read_dataset_csv, write_dataset_csv, write_spec_json
from .tuning import DegenerateDistanceError, elbow_curve, omega_avg, write_elbow_csv
from .uq import METRICS, credible_ball, fold_psm, per_draw_minimizers, write_ball_json

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


def _config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out, command, config, outputs, started):
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": _config_hash(config),
        "seed": config.get("seed"),
        "started": started,
        "elapsed_seconds": round(time.time() - started, 3),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": {name: file_sha256(os.path.join(out, name)) for name in outputs},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_labels_csv(path, labels):
    with open(path, "w", newline="") as fh:
        fh.write("label\n")
        fh.writelines("%d\n" % v for v in labels)


def read_labels_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][0] == "label":
        rows = rows[1:]
    return canonicalize(np.array([int(r[0]) for r in rows]))


def _read_matrix(path):
    return read_delta_bin(path) if path.endswith(".bin") else read_delta_csv(path)


def _write_matrix(path, m):
    (write_delta_bin if path.endswith(".bin") else write_delta_csv)(path, m)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    started = time.time()
    if args.scenario not in SCENARIOS:
        raise ConfigError("unknown scenario %r" % args.scenario)
    out = _outdir(args.out)
    data = generate(args.scenario, args.n, args.seed)
    write_dataset_csv(os.path.join(out, "data.csv"), data)
    write_spec_json(os.path.join(out, "spec.json"), data.spec)
    config = {"scenario": args.scenario, "n": args.n, "seed": args.seed}
    _write_manifest(out, "simulate", config, ["data.csv", "spec.json"], started)


def _prior_from_args(args, p):
    if args.prior:
        with open(args.prior) as fh:
            d = json.load(fh)
        return GmmPrior.from_dict(d)
    if args.fixed_cov is not None:
        return GmmPrior.location(args.fixed_cov * np.eye(p), k=args.k, alpha=args.alpha,
                                 loc_cov=args.loc_cov * np.eye(p))
    nu = p + 2.0 if args.nu is None else args.nu
    return GmmPrior(k=args.k, alpha=args.alpha, mu=np.zeros(p), kappa=args.kappa, nu=nu,
                    psi=args.psi * np.eye(p))


def cmd_fit(args):
    started = time.time()
    x, _ = read_dataset_csv(args.data)
    prior = _prior_from_args(args, x.shape[1])
    chain = ChainConfig(args.iterations, args.burn_in, args.thin, args.seed)
    out = _outdir(args.out)
    samples = run_gibbs(x, prior, chain)
    save_draws(os.path.join(out, "draws.csv"), samples)
    config = {"data": os.path.abspath(args.data), "data_sha256": file_sha256(args.data),
              "prior": prior.to_dict(), "iterations": chain.iterations, "burn_in": chain.burn_in,
              "thin": chain.thin, "seed": chain.seed}
    _write_manifest(out, "fit", config, ["draws.csv"], started)


def _resolve_omega(args, delta):
    if args.omega_mode == "fixed":
        if args.omega is None:
            raise ConfigError("--omega-mode fixed needs --omega")
        return LossParams(args.omega)
    if args.omega_mode == "avg":
        return omega_avg(delta)
    if args.omega is None:
        raise ConfigError("elbow mode needs an explicit --omega chosen from the curve written by "
                          "the 'elbow' command")
    return LossParams(args.omega)


def cmd_cluster(args):
    started = time.time()
    samples = load_draws(args.draws)
    out = _outdir(args.out)
    delta = estimate_delta(samples, n_jobs=args.jobs)
    params = _resolve_omega(args, delta)
    greedy = GreedyConfig(restarts=args.restarts, seed=args.seed)
    est = point_estimate(delta, params, greedy)
    outputs = ["labels.csv", "risk.json", "delta.csv"]
    write_labels_csv(os.path.join(out, "labels.csv"), est.labels)
    write_delta_csv(os.path.join(out, "delta.csv"), delta)
    report = risk_report(est.labels, delta, params)
    summary = {"omega": params.omega, "gamma": params.gamma, "risk": report.risk,
               "normalized_risk": report.normalized, "n_pairs": report.n_pairs, "k": est.k,
               "path_risk": est.path_risk, "greedy_risk": est.greedy_risk}
    if args.omega_mode == "elbow":
        write_elbow_csv(os.path.join(out, "elbow.csv"), elbow_curve(delta, path=est.path))
        outputs.append("elbow.csv")
    if args.compare:
        c_b = binder_estimate(allocation_psm(samples), greedy)
        c_vi = vi_estimate(samples)
        write_labels_csv(os.path.join(out, "labels_binder.csv"), c_b)
        write_labels_csv(os.path.join(out, "labels_vi.csv"), c_vi)
        outputs += ["labels_binder.csv", "labels_vi.csv"]
        summary.update(k_binder=int(c_b.max()) + 1, k_vi=int(c_vi.max()) + 1)
    if args.truth:
        _, truth = read_dataset_csv(args.truth)
        if truth is None:
            raise ConfigError("%s has no truth column" % args.truth)
        summary["ari_truth"] = adjusted_rand_index(est.labels, truth)
    with open(os.path.join(out, "risk.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = {"draws": os.path.abspath(args.draws), "draws_sha256": file_sha256(args.draws),
              "omega_mode": args.omega_mode, "omega": params.omega, "restarts": args.restarts,
              "seed": args.seed, "compare": bool(args.compare)}
    _write_manifest(out, "cluster", config, outputs, started)
    print("k=%d omega=%.6g risk=%.6g" % (est.k, params.omega, report.risk))


def cmd_elbow(args):
    started = time.time()
    out = _outdir(args.out)
    if args.delta:
        delta = _read_matrix(args.delta)
        source = {"delta": os.path.abspath(args.delta)}
    elif args.draws:
        delta = estimate_delta(load_draws(args.draws))
        source = {"draws": os.path.abspath(args.draws)}
    else:
        raise ConfigError("elbow needs --draws or --delta")
    omegas = None
    if args.omegas:
        omegas = [float(v) for v in args.omegas.split(",")]
    points = elbow_curve(delta, omegas)
    write_elbow_csv(os.path.join(out, "elbow.csv"), points)
    _write_manifest(out, "elbow", dict(source, omegas=omegas, seed=None), ["elbow.csv"], started)
    for p in points:
        print("omega=%-12.6g k=%-5d r=%.4f" % (p.omega, p.k_star, p.r_omega))


def cmd_uq(args):
    started = time.time()
    samples = load_draws(args.draws)
    center = read_labels_csv(args.center)
    if center.size != samples.n:
        raise ConfigError("center has %d labels but the draws cover %d observations" % (center.size, samples.n))
    out = _outdir(args.out)
    if args.omega is not None:
        params = LossParams(args.omega)
    else:
        params = omega_avg(estimate_delta(samples))
    step = max(1, samples.t // args.max_draws) if args.max_draws else 1
    if step > 1:
        samples = PosteriorSamples(samples.weights[::step], samples.means[::step],
                                   samples.chols[::step], samples.alloc[::step])
    cfg = GreedyConfig(restarts=args.restarts, seed=args.seed)
    draws_c = per_draw_minimizers(samples, params, cfg, n_jobs=args.jobs)
    ball = credible_ball(center, draws_c, level=args.level, metric=args.metric)
    with open(os.path.join(out, "minimizers.csv"), "w", newline="") as fh:
        fh.writelines(",".join(map(str, row)) + "\n" for row in draws_c.tolist())
    write_ball_json(os.path.join(out, "ball.json"), ball)
    _write_matrix(os.path.join(out, "psm.csv"), fold_psm(draws_c))
    config = {"draws": os.path.abspath(args.draws), "center": os.path.abspath(args.center),
              "omega": params.omega, "level": args.level, "metric": args.metric,
              "restarts": args.restarts, "seed": args.seed, "thin_step": step}
    _write_manifest(out, "uq", config, ["minimizers.csv", "ball.json", "psm.csv"], started)
    print("radius=%.6g coverage=%.4f bounds: %d horizontal, %d upper, %d lower"
          % (ball.radius, ball.coverage, len(ball.horizontal), len(ball.vertical_upper),
             len(ball.vertical_lower)))


def _convergence_config(d):
    chain = ChainConfig(d.get("iterations", 9000), d.get("burn_in", 1000), d.get("thin", 3))
    return ConvergenceConfig(n_grid=tuple(d.get("n_grid", (50, 1000))), seeds=tuple(d.get("seeds", (0, 1, 2))),
                             chain=chain, greedy=GreedyConfig(restarts=d.get("restarts", 8)),
                             max_candidates=d.get("max_candidates", 20))


def _run_convergence(cfg, out, command, config, started):
    runs = validate_convergence(cfg, progress=lambda r: print(
        "n=%d seed=%d ari=%.3f gap=%.3g k_fold=%d k_oracle=%d"
        % (r.n, r.seed, r.ari_fold_vs_oracle, r.mean_gap, r.k_fold, r.k_oracle), flush=True))
    write_convergence_csv(os.path.join(out, "convergence.csv"), runs)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump({str(k): v for k, v in summarize_convergence(runs).items()}, fh, indent=2)
        fh.write("\n")
    _write_manifest(out, command, config, ["convergence.csv", "summary.json"], started)


def cmd_replicate(args):
    started = time.time()
    with open(args.spec) as fh:
        raw = json.load(fh)
    out = _outdir(args.out)
    if raw.get("experiment") == "convergence":
        cfg = _convergence_config({k: v for k, v in raw.items() if k != "experiment"})
        _run_convergence(cfg, out, "replicate", raw, started)
        return
    spec = load_spec(args.spec)
    records = replicate(spec, progress=lambda recs: print(
        " ".join("%s:ari=%.3f,k=%d" % (r["method"], r["ari"], r["k"]) for r in recs), flush=True))
    write_records_csv(os.path.join(out, "records.csv"), records)
    write_summary_csv(os.path.join(out, "table.csv"), summarize(records))
    _write_manifest(out, "replicate", spec.to_dict(), ["records.csv", "table.csv"], started)


def cmd_oracle_validate(args):
    started = time.time()
    config = {"n_grid": args.n, "seeds": args.seeds, "iterations": args.iterations,
              "burn_in": args.burn_in, "thin": args.thin, "restarts": args.restarts,
              "max_candidates": args.max_candidates, "seed": None}
    _run_convergence(_convergence_config(config), _outdir(args.out), "oracle-validate", config, started)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="foldclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labelled synthetic data set")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the Gibbs sampler and save the draws")
    p.add_argument("--data", required=True, help="CSV of features (optional trailing truth column)")
    p.add_argument("--out", required=True)
    p.add_argument("--prior", help="JSON prior; overrides the prior flags")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=None, help="default p + 2")
    p.add_argument("--psi", type=float, default=1.0, help="scale matrix is psi * I")
    p.add_argument("--fixed-cov", type=float, default=None,
                   help="fit a location model with kernel covariance FIXED_COV * I")
    p.add_argument("--loc-cov", type=float, default=1.0, help="prior covariance of means for --fixed-cov")
    p.add_argument("--iterations", type=int, default=9000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cluster", help="point estimate from saved draws")
    p.add_argument("--draws", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--omega-mode", choices=("avg", "fixed", "elbow"), default="avg")
    p.add_argument("--omega", type=float)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--compare", action="store_true", help="also write Binder and VI estimates")
    p.add_argument("--truth", help="data CSV with a truth column, to report the ARI")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("elbow", help="write the elbow curve for choosing omega")
    p.add_argument("--draws")
    p.add_argument("--delta", help="distance matrix (.csv or .bin) instead of draws")
    p.add_argument("--omegas", help="comma-separated omega grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_elbow)

    p = sub.add_parser("uq", help="credible ball and similarity matrix from per-draw minimizers")
    p.add_argument("--draws", required=True)
    p.add_argument("--center", required=True, help="labels CSV written by 'cluster'")
    p.add_argument("--out", required=True)
    p.add_argument("--omega", type=float, help="default: averaged omega of the draws")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--metric", choices=METRICS, default="vi")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-draws", type=int, default=0, help="thin the draws to at most this many")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_uq)

    p = sub.add_parser("replicate", help="run a replicated simulation study from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("oracle-validate", help="compare estimates with the known-mixture oracle")
    p.add_argument("--n", type=int, nargs="+", default=[50, 1000])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--iterations", type=int, default=9000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=3)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-candidates", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DegenerateChainError, DegenerateDistanceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
