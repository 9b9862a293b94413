"""Command-line experiment runner.

Each subcommand reads a configuration (``--config``, flags override), runs
one experiment and writes CSV files plus ``manifest.json`` into the output
directory.  The first line of every CSV is a comment carrying the config
hash and the seed.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, parse_config
from .errors import HitstatsError
from .lawcheck import (
    correlation_estimator,
    default_t_grid,
    delta_estimator,
    ks_exponential,
    superpoly_fit,
    survival_curve,
)
from .measure import (
    annulus_check,
    conditional_starts,
    estimate_stationary,
    stationarity_pvalue,
    stationary_starts,
    uniformity_pvalue,
)
from .recurrence import default_cutoff, hitting_upper_bound_check, recurrence_rate, simulate_hitting
from .streams import default_workers, stream
from .torus import Ball

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_ESTIMATOR_ERROR = 3

MAX_CENSOR_FRACTION = 1e-3

SUBCOMMANDS = (
    "orbit",
    "hitting-law",
    "return-law",
    "recurrence-rate",
    "delta",
    "correlations",
    "annulus-check",
    "stationary",
)


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def write_csv(path, cfg, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={cfg.hash()} seed={cfg.seed} version={__version__}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


class Run:
    """Output directory, timing and check bookkeeping for one invocation."""

    def __init__(self, cfg, command, workers):
        self.cfg = cfg
        self.command = command
        self.workers = workers
        self.t0 = time.perf_counter()
        self.files = []
        self.checks = {}
        self.summary = {}
        self.censored = 0
        self.total = 0
        os.makedirs(cfg.out, exist_ok=True)

    def path(self, name, sub=None):
        d = self.cfg.out if sub is None else os.path.join(self.cfg.out, sub)
        os.makedirs(d, exist_ok=True)
        return os.path.join(d, name)

    def csv(self, name, columns, rows, sub=None):
        self.files.append(write_csv(self.path(name, sub), self.cfg, columns, rows))

    def check(self, name, passed, **detail):
        self.checks[name] = {"passed": bool(passed), **detail}

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def finish(self):
        manifest = {
            "config_hash": self.cfg.hash(),
            "seed": self.cfg.seed,
            "version": __version__,
            "subcommand": self.command,
            "wall_clock_seconds": round(time.perf_counter() - self.t0, 3),
            "workers": self.workers,
            "censor": {
                "count": self.censored,
                "total": self.total,
                "fraction": self.censored / self.total if self.total else 0.0,
            },
            "config": self.cfg.canonical(),
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed,
            "files": [os.path.relpath(f, self.cfg.out) for f in self.files],
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return manifest


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


DEFAULT_RADII = {
    "hitting-law": [0.005],
    "return-law": [0.005],
    "recurrence-rate": [2.0**-k for k in range(5, 13)],
    "delta": [0.1, 0.01, 0.001],
    "annulus-check": [0.25, 0.125, 0.0625],
}


def _radii(run):
    return run.cfg.radius or DEFAULT_RADII.get(run.command, [0.005])


def _sub(radii, i):
    return None if len(radii) == 1 else f"r{i}"


def _estimate(cfg, system):
    return estimate_stationary(system, cfg.burn_in, cfg.stationary_samples, cfg.seed)


# ------------------------------------------------------------------ commands

def run_orbit(run):
    cfg = run.cfg
    system = cfg.system()
    rng = stream(cfg.seed, "orbit")
    orbit = system.start(rng) if cfg.start is None else system.start_at(cfg.start, rng)
    rows = [(0, orbit.drive, orbit.value)]
    for k in range(1, cfg.steps + 1):
        drive = orbit.drive
        orbit.step()
        rows.append((k, drive if orbit.drive is None else orbit.drive, orbit.value))
    run.csv("orbit.csv", ["step", "drive", "x"], rows)


def _hitting(run, conditional):
    cfg = run.cfg
    system = cfg.system()
    est = _estimate(cfg, system)
    tag = "return-law" if conditional else "hitting-law"
    t_grid = default_t_grid(cfg.t_points, cfg.t_min, cfg.t_max)
    results = []
    radii = _radii(run)
    for i, r in enumerate(radii):
        target = Ball(cfg.target, r)
        mass = est.ball_mass(target)
        if mass <= 0:
            raise HitstatsError(f"estimated mass of B({cfg.target}, {r}) is zero")
        cutoff = cfg.cutoff or default_cutoff(mass)
        starts = None
        if est.kind == "empirical":
            if conditional:
                starts = conditional_starts(system, target, cfg.samples, cfg.seed, f"{tag}-starts-{i}", cfg.burn_in)
            else:
                starts = stationary_starts(system, cfg.samples, cfg.seed, f"{tag}-starts-{i}", cfg.burn_in)
        batch = simulate_hitting(system, target, cfg.samples, cfg.seed, rescale=mass, cutoff=cutoff,
                                 conditional=conditional, starts=starts, tag=f"{tag}-{i}",
                                 workers=run.workers)
        curve = survival_curve(batch, t_grid)
        ks = ks_exponential(curve)
        sub = _sub(radii, i)
        run.csv("samples.csv", ["sample_id", "tau", "rescaled_tau", "censored"],
                ((j, t, t * mass, c) for j, (t, c) in
                 enumerate(zip(batch.taus.tolist(), batch.censored.tolist()))), sub)
        e = np.exp(-curve.t_grid)
        run.csv("survival.csv", ["t", "empirical_survival", "exp_neg_t", "abs_diff"],
                zip(curve.t_grid, curve.survival, e, np.abs(curve.survival - e)), sub)
        run.censored += batch.censor_count
        run.total += len(batch)
        frac = batch.censor_count / len(batch)
        run.check(f"censoring[{r}]", frac < MAX_CENSOR_FRACTION, fraction=frac)
        if not conditional:
            for n in cfg.bound_n:
                if n <= cutoff:
                    rep = hitting_upper_bound_check(batch, mass, n)
                    run.check(f"bound[{r},{n}]", rep.passed, fraction=rep.fraction, bound=rep.bound,
                              margin=rep.margin)
        if cfg.ks_tolerance is not None:
            run.check(f"ks[{r}]", ks <= cfg.ks_tolerance, ks=ks, tolerance=cfg.ks_tolerance)
        results.append({"radius": r, "ball_mass": mass, "cutoff": cutoff, "ks": ks,
                        "censored": batch.censor_count})
    run.summary["radii"] = results
    run.summary["measure"] = est.kind


def run_hitting_law(run):
    _hitting(run, conditional=False)


def run_return_law(run):
    _hitting(run, conditional=True)


def run_rate(run):
    cfg = run.cfg
    system = cfg.system()
    radii = sorted(_radii(run), reverse=True)
    rows, slopes = [], []
    for s in range(cfg.starts):
        rng = stream(cfg.seed, "recurrence-start", s)
        x = system.start(rng).point if cfg.start is None else cfg.start
        est = recurrence_rate(system, x, radii, cutoff=cfg.cutoff, seed=cfg.seed, tag=f"recurrence-rate-{s}")
        slopes.append(est.slope)
        for r, t in zip(est.radii, est.taus):
            rows.append((r, t, math.log2(r), math.log2(t)))
        run.censored += sum(est.censored)
        run.total += len(radii)
    run.csv("rate.csv", ["r", "tau", "log2_r", "log2_tau"], rows)
    run.summary["slopes"] = slopes
    run.summary["mean_slope"] = float(np.mean(slopes))


def run_delta(run):
    cfg = run.cfg
    system = cfg.system()
    est = _estimate(cfg, system)
    deltas = []
    radii = _radii(run)
    for i, r in enumerate(radii):
        target = Ball(cfg.target, r)
        d = delta_estimator(system, target, K=cfg.k_max, N=cfg.samples, seed=cfg.seed,
                            workers=run.workers, estimate=est, burn_in=cfg.burn_in)
        run.csv("delta.csv", ["k", "surv_uncond", "surv_cond", "abs_diff"],
                zip(d.k_grid, d.surv_uncond, d.surv_cond, np.abs(d.surv_uncond - d.surv_cond)),
                _sub(radii, i))
        deltas.append({"radius": r, "delta_hat": d.delta_hat, "argmax_k": d.argmax,
                       "stderr": d.stderr, "K": int(d.k_grid[-1])})
    run.summary["deltas"] = deltas
    if len(deltas) > 1:
        by_r = [d["delta_hat"] for d in sorted(deltas, key=lambda d: -d["radius"])]
        run.check("delta_decreasing", all(b < a for a, b in zip(by_r, by_r[1:])), values=by_r)
    if cfg.delta_tolerance is not None:
        smallest = min(deltas, key=lambda d: d["radius"])
        run.check("delta_small", smallest["delta_hat"] <= cfg.delta_tolerance,
                  delta_hat=smallest["delta_hat"], tolerance=cfg.delta_tolerance)


def run_correlations(run):
    cfg = run.cfg
    system = cfg.system()
    series = correlation_estimator(system, cfg.psi, cfg.phi, range(cfg.n_max + 1), cfg.samples,
                                   cfg.seed, cfg.burn_in)
    run.csv("correlations.csv", ["n", "estimate", "stderr"],
            zip(series.n_grid, series.estimates, series.stderr))
    run.summary["superpolynomial"] = {str(p): ok for p, ok in superpoly_fit(series, cfg.p_list).items()}
    if cfg.zero_sigmas is not None:
        z = [abs(e) <= cfg.zero_sigmas * s for n, e, s in
             zip(series.n_grid, series.estimates, series.stderr) if n >= 1]
        run.check("zero_beyond_lag0", all(z), sigmas=cfg.zero_sigmas)


def run_annulus(run):
    cfg = run.cfg
    system = cfg.system()
    est = _estimate(cfg, system)
    rep = annulus_check(est, cfg.target, cfg.a, cfg.b, _radii(run), cfg.rho)
    run.csv("annulus.csv", ["r", "rho", "mass", "bound", "ratio"], rep.cells)
    run.summary["worst_ratio"] = rep.worst_ratio
    run.check("annulus", rep.passed, a=cfg.a, b=cfg.b, worst_ratio=rep.worst_ratio)


def run_stationary(run):
    cfg = run.cfg
    system = cfg.system()
    est = estimate_stationary(system, cfg.burn_in, cfg.stationary_samples, cfg.seed, force_empirical=True)
    hist, edges = np.histogram(est.samples, bins=50, range=(0.0, 1.0), density=True)
    run.csv("stationary.csv", ["bin_left", "bin_right", "density"], zip(edges[:-1], edges[1:], hist))
    p_step = stationarity_pvalue(est, system, cfg.seed)
    run.summary["stationarity_pvalue"] = p_step
    run.check("one_step_invariance", p_step >= 1e-3, pvalue=p_step)
    if system.stationary == "lebesgue":
        p_unif = uniformity_pvalue(est.samples)
        run.summary["uniformity_pvalue"] = p_unif
        run.check("lebesgue", p_unif >= 1e-3, pvalue=p_unif)


COMMANDS = {
    "orbit": run_orbit,
    "hitting-law": run_hitting_law,
    "return-law": run_return_law,
    "recurrence-rate": run_rate,
    "delta": run_delta,
    "correlations": run_correlations,
    "annulus-check": run_annulus,
    "stationary": run_stationary,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hitstats", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--family", help="system family (instead of a config file)")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--radius", type=float, action="append")
        p.add_argument("--target", type=float)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--workers", type=int, default=None)
    return parser


def load_config(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    overrides = {
        "family": args.family,
        "seed": args.seed,
        "samples": args.samples,
        "radius": args.radius,
        "target": args.target,
        "dir": args.out,
    }
    return parse_config(text, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    workers = args.workers or default_workers()
    run = Run(cfg, args.command, workers)
    try:
        COMMANDS[args.command](run)
    except (HitstatsError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        run.check("completed", False, error=f"{type(exc).__name__}: {exc}")
        run.finish()
        return EXIT_ESTIMATOR_ERROR
    manifest = run.finish()
    for name, c in manifest["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}")
    return EXIT_OK if run.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
