"""Acceptance criteria AC-1 .. AC-11 at their stated tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
are produced; they are also repeated in the terminal summary.
"""

from fractions import Fraction
import math
import os
import subprocess
import sys
import time

import numpy as np
from scipy import stats

from hitstats.lawcheck import (
    correlation_estimator,
    delta_estimator,
    geometric_law_gap,
    ks_exponential,
    survival_curve,
)
from hitstats.measure import estimate_stationary, stationary_starts, uniformity_pvalue
from hitstats.recurrence import hitting_upper_bound_check, recurrence_rate, simulate_hitting
from hitstats.streams import stream
from hitstats.systems import (
    LABEL_MATRIX,
    AffineSystem,
    BetaSystem,
    MarkovSkewSystem,
    PerturbedSystem,
    SkewOrbit,
    UniformParam,
    count_periodic_points,
    expanding_in_average,
    markov_stationary,
    random_exact_point,
)
from hitstats.torus import Ball

SEED = 20140611
X0 = math.sqrt(2.0) - 1.0
MAX_CENSOR = 1e-3
HERE = os.path.dirname(os.path.abspath(__file__))


def hitting_ks(system, radius, n, conditional=False, mass=None, starts=None, tag=None):
    target = Ball(X0, radius)
    mass = 2.0 * radius if mass is None else mass
    b = simulate_hitting(system, target, n, SEED, rescale=mass, conditional=conditional,
                         starts=starts, tag=tag)
    return ks_exponential(survival_curve(b)), b.censor_count / n


def test_ac1_hitting_law(criterion):
    t0 = time.perf_counter()
    ks, cens = hitting_ks(MarkovSkewSystem("markov"), 5e-3, 50_000)
    dt = time.perf_counter() - t0
    ok = ks <= 0.02 and cens < MAX_CENSOR
    assert criterion("AC-1 hitting law", ok, f"KS={ks:.5f} (<=0.02) censored={cens:.2e} time={dt:.1f}s")


def test_ac2_return_law(criterion):
    ks, cens = hitting_ks(MarkovSkewSystem("markov"), 5e-3, 20_000, conditional=True)
    ok = ks <= 0.03 and cens < MAX_CENSOR
    assert criterion("AC-2 return law", ok, f"KS={ks:.5f} (<=0.03) censored={cens:.2e}")


def test_ac3_recurrence_rate(criterion):
    t0 = time.perf_counter()
    system = AffineSystem(2)
    radii = [2.0**-k for k in range(5, 13)]
    slopes = []
    for i in range(100):
        x = system.start(stream(SEED, "ac3-start", i)).point
        slopes.append(recurrence_rate(system, x, radii, seed=SEED, tag=f"ac3-{i}").slope)
    dt = time.perf_counter() - t0
    mean = float(np.mean(slopes))
    ok = 0.85 <= mean <= 1.15 and dt <= 30.0
    assert criterion("AC-3 recurrence rate", ok, f"mean slope={mean:.4f} in [0.85,1.15] time={dt:.1f}s (<=30s)")


def test_ac4_delta_decay(criterion):
    system = MarkovSkewSystem("markov")
    radii = [0.1, 0.01, 0.001]
    d = [delta_estimator(system, Ball(X0, r), N=50_000, seed=SEED) for r in radii]
    vals = [e.delta_hat for e in d]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    small = vals[-1] <= 0.05
    detail = ", ".join(f"delta({r:g})={v:.4f}+-{e.stderr:.4f}@k={e.argmax}" for r, v, e in zip(radii, vals, d))
    assert criterion("AC-4 delta decay", decreasing and small,
                     f"{detail}; strictly decreasing={decreasing}, delta(0.001)<=0.05: {small}")


def test_ac5_correlations(criterion):
    s = correlation_estimator(AffineSystem(2), "cos", "indicator", range(11), N=1_000_000, seed=SEED)
    lag0 = abs(s.estimates[0] - 1.0 / (2.0 * math.pi)) <= 3 * s.stderr[0]
    rest = np.abs(s.estimates[1:]) / s.stderr[1:]
    ok = lag0 and bool(np.all(rest <= 3))
    assert criterion("AC-5 decay of correlations", ok,
                     f"C(0)={s.estimates[0]:.5f} vs {1 / (2 * math.pi):.5f}; max |C(n)|/se for n>=1: {rest.max():.2f} (<=3)")


def test_ac6_markov_labels(criterion):
    rng = stream(SEED, "ac6")
    labels = SkewOrbit(random_exact_point(rng), rng.random()).labels(1_000_000)
    counts = np.zeros((2, 2))
    np.add.at(counts, (labels[:-1], labels[1:]), 1)
    P = counts / counts.sum(axis=1, keepdims=True)
    freq = np.bincount(labels, minlength=2) / len(labels)
    pi = markov_stationary(LABEL_MATRIX)
    err_p = float(np.max(np.abs(P - np.array(LABEL_MATRIX))))
    err_f = float(np.max(np.abs(freq - pi)))
    ok = err_p <= 0.02 and err_f <= 0.01
    assert criterion("AC-6 Markov labels", ok,
                     f"max|P-A|={err_p:.4f} (<=0.02) freq={freq.round(4).tolist()} max|freq-pi|={err_f:.4f} (<=0.01)")


def test_ac7_perturbed(criterion):
    system = PerturbedSystem(2, 0.1)
    est = estimate_stationary(system, burn_in=1000, N=100_000, seed=SEED, force_empirical=True)
    p = uniformity_pvalue(est.samples)
    ks, cens = hitting_ks(system, 5e-3, 50_000)
    ok = p >= 1e-3 and ks <= 0.02 and cens < MAX_CENSOR
    assert criterion("AC-7 perturbed doubling", ok, f"uniform KS p={p:.3g} (>=1e-3) hitting KS={ks:.5f} (<=0.02)")


def test_ac8_beta(criterion):
    integral = expanding_in_average(UniformParam(2.0, 3.0))
    err = abs(integral - math.log(1.5))
    system = BetaSystem(2.0, 3.0)
    est = estimate_stationary(system, burn_in=1000, N=500_000, seed=SEED)
    mass = est.ball_mass(Ball(X0, 5e-3))
    starts = stationary_starts(system, 20_000, SEED, "ac8-starts", 1000)
    ks, cens = hitting_ks(system, 5e-3, 20_000, mass=mass, starts=starts)
    ok = err <= 1e-6 and ks <= 0.03 and cens < MAX_CENSOR
    assert criterion("AC-8 beta maps", ok,
                     f"integral={integral:.9f} |err|={err:.1e} (<=1e-6) nu(B)={mass:.5f} KS={ks:.5f} (<=0.03)")


def _fixed_points_by_search(m, n):
    # solutions of m^n x = x (mod 1) are k/(m^n - 1); verify each with rationals
    M = m**n
    count = 0
    for k in range(M - 1):
        x = y = Fraction(k, M - 1)
        for _ in range(n):
            y = (m * y) % 1
        count += y == x
    return count


def test_ac9_periodic_points(criterion):
    got = [count_periodic_points(2, n) for n in range(1, 11)]
    oracle = [_fixed_points_by_search(2, n) for n in range(1, 11)]
    ok = got == oracle == [2**n - 1 for n in range(1, 11)]
    assert criterion("AC-9 periodic points", ok, f"counts n=1..10: {got}")


def test_ac10_hitting_bounds(criterion):
    system = MarkovSkewSystem("markov")
    ns = [1, 5, 10, 50]
    parts, ok = [], True
    for r in (0.05, 0.01):
        d = delta_estimator(system, Ball(X0, r), N=50_000, seed=SEED)
        for n in ns:
            rep = hitting_upper_bound_check(d.uncond, d.ball_mass, n)
            ok &= rep.passed
        curve = survival_curve(d.uncond)
        gap = geometric_law_gap(curve, d.ball_mass, ns)
        sigma = math.hypot(gap.stderr, d.stderr)
        ok &= gap.gap <= d.delta_hat + 4 * sigma
        parts.append(f"r={r}: gap={gap.gap:.4f} delta={d.delta_hat:.4f} sigma={sigma:.4f}")
    assert criterion("AC-10 hitting bounds", bool(ok), "; ".join(parts))


def test_ac11_invariant_suites(criterion):
    modules = [os.path.join(HERE, f"test_{m}.py") for m in ("torus", "systems", "recurrence", "measure", "lawcheck", "cli")]
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *modules],
                          capture_output=True, text=True)
    dt = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and dt <= 300
    assert criterion("AC-11 invariant suites", ok, f"{tail} ({dt:.0f}s, <=300s)")
