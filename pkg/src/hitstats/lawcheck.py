"""Survival curves of rescaled hitting times and the statistics built on them.

* :func:`survival_curve` / :func:`ks_exponential` -- distance to ``exp(-t)``.
* :func:`delta_estimator` -- sup-gap between the hitting-time survival of
  orbits started anywhere and of orbits started inside the target.
* :func:`geometric_law_gap` -- distance of the survival to ``(1 - m)**n``.
* :func:`correlation_estimator` / :func:`superpoly_fit` -- decay of
  correlations diagnostics.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import MixedRescale
from .measure import LEBESGUE, conditional_starts, stationary_starts
from .recurrence import HittingBatch, simulate_hitting
from .streams import stream


def default_t_grid(points=60, t_min=0.05, t_max=6.0):
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, points)])


def _batch_arrays(samples):
    if isinstance(samples, HittingBatch):
        return samples.taus, samples.censored, samples.rescale, samples.cutoff
    samples = list(samples)
    if not samples:
        raise ValueError("empty sample batch")
    rescales = {s.rescale for s in samples}
    if len(rescales) > 1:
        raise MixedRescale("samples carry different rescale factors")
    cens = np.array([s.censored for s in samples], dtype=bool)
    cutoffs = {s.tau.cutoff for s in samples if s.censored}
    if len(cutoffs) > 1:
        raise ValueError("censored samples carry different cutoffs")
    cutoff = cutoffs.pop() if cutoffs else 0
    taus = np.array([cutoff if s.censored else s.tau for s in samples], dtype=np.int64)
    return taus, cens, rescales.pop(), cutoff


@dataclass
class SurvivalCurve:
    """Empirical ``P(tau * rescale > t)``.

    Censored samples count as surviving every ``t`` below
    ``censor_level = cutoff * rescale`` and as dead from there on.
    """

    t_grid: np.ndarray
    survival: np.ndarray
    N: int
    censor_count: int
    rescale: float
    times: np.ndarray  # sorted uncensored integer hitting times
    cutoff: int

    @property
    def censor_level(self):
        return self.cutoff * self.rescale

    def survival_at(self, t, left=False):
        """Survival at ``t`` (or its left limit ``t-``), vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        rescaled = self.times * self.rescale
        side = "left" if left else "right"
        alive = len(rescaled) - np.searchsorted(rescaled, t, side=side)
        below = t <= self.censor_level if left else t < self.censor_level
        alive = alive + self.censor_count * below
        return alive / self.N

    def survival_at_step(self, n):
        """``P(tau > n)`` for integer ``n``."""
        n = np.asarray(n)
        alive = len(self.times) - np.searchsorted(self.times, n, side="right")
        alive = alive + self.censor_count * (n < self.cutoff)
        return alive / self.N

    def stderr_at_step(self, n):
        s = self.survival_at_step(n)
        return np.sqrt(s * (1.0 - s) / self.N)


def survival_curve(samples, t_grid=None):
    taus, cens, rescale, cutoff = _batch_arrays(samples)
    if t_grid is None:
        t_grid = default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    times = np.sort(taus[~cens])
    curve = SurvivalCurve(t_grid, None, len(taus), int(cens.sum()), float(rescale), times, int(cutoff))
    curve.survival = curve.survival_at(t_grid)
    return curve


def ks_exponential(curve):
    """Sup over ``t >= 0`` of ``|S(t) - exp(-t)|``.

    Between jumps the empirical curve is flat and ``exp(-t)`` is monotone, so
    the sup is attained at a grid point or at one side of a jump.
    """
    jumps = np.unique(curve.times) * curve.rescale
    if curve.censor_count:
        jumps = np.append(jumps, curve.censor_level)
    pts = np.concatenate([curve.t_grid, jumps])
    e = np.exp(-pts)
    right = np.abs(curve.survival_at(pts) - e)
    d = float(right.max()) if right.size else 0.0
    if jumps.size:
        left = np.abs(curve.survival_at(jumps, left=True) - np.exp(-jumps))
        d = max(d, float(left.max()))
    return d


# -------------------------------------------------------------- geometric gap

@dataclass
class GapReport:
    n_grid: list
    empirical: list
    reference: list
    gap: float
    argmax: int
    stderr: float


def geometric_law_gap(curve, ball_mass, n_grid):
    """Largest ``|P(tau > n) - (1 - mass)**n|`` over ``n_grid``."""
    if not 0.0 < ball_mass < 1.0:
        raise ValueError("ball_mass must be in (0, 1)")
    n_grid = [int(n) for n in n_grid]
    emp = curve.survival_at_step(np.array(n_grid)).tolist()
    ref = [(1.0 - ball_mass) ** n for n in n_grid]
    diffs = [abs(a - b) for a, b in zip(emp, ref)]
    j = int(np.argmax(diffs))
    se = float(curve.stderr_at_step(n_grid[j]))
    return GapReport(n_grid, emp, ref, diffs[j], n_grid[j], se)


# -------------------------------------------------------------------- delta

@dataclass
class DeltaEstimate:
    k_grid: np.ndarray
    surv_uncond: np.ndarray
    surv_cond: np.ndarray
    se_uncond: np.ndarray
    se_cond: np.ndarray
    delta_hat: float
    argmax: int
    ball_mass: float
    uncond: HittingBatch = None
    cond: HittingBatch = None

    @property
    def stderr(self):
        """Combined standard error of the difference at the maximising ``k``."""
        i = self.argmax - int(self.k_grid[0])
        return float(math.hypot(self.se_uncond[i], self.se_cond[i]))


def survival_by_step(batch, K):
    """``P(tau > k)`` for ``k = 1..K``; needs ``batch.cutoff >= K``."""
    if batch.cutoff < K and batch.censored.any():
        raise ValueError("cutoff below K")
    N = len(batch)
    counts = np.bincount(np.minimum(batch.taus[~batch.censored], K + 1), minlength=K + 2)
    dead = np.cumsum(counts)[1 : K + 1]
    return (N - dead) / N


def delta_from_batches(uncond, cond, K, ball_mass):
    k = np.arange(1, K + 1)
    su = survival_by_step(uncond, K)
    sc = survival_by_step(cond, K)
    diff = np.abs(su - sc)
    j = int(np.argmax(diff))
    seu = np.sqrt(su * (1.0 - su) / len(uncond))
    sec = np.sqrt(sc * (1.0 - sc) / len(cond))
    return DeltaEstimate(k, su, sc, seu, sec, float(diff[j]), int(k[j]), ball_mass, uncond, cond)


def delta_estimator(system, target, K=None, N=50_000, seed=0, workers=1, estimate=None,
                    burn_in=None):
    """Estimate ``sup_k |P(tau > k) - P(tau > k | start in target)|``.

    Both survivals are computed for ``k = 1..K`` from ``N`` orbits each;
    ``K`` defaults to ``ceil(20 / mass)``.  For Lebesgue-stationary systems
    the conditioned start is drawn directly from the arc, otherwise by
    rejection from stationary samples (``estimate`` supplies the mass).
    """
    est = estimate if estimate is not None else LEBESGUE
    if system.stationary == "lebesgue":
        mass = LEBESGUE.ball_mass(target)
    else:
        if est.kind == "analytic_lebesgue":
            raise ValueError("system needs an empirical stationary estimate")
        mass = est.ball_mass(target)
    if mass <= 0:
        raise ValueError("target has zero mass")
    if K is None:
        K = int(math.ceil(20.0 / mass))
    if K < 1:
        raise ValueError("K must be >= 1")
    starts_u = starts_c = None
    if system.stationary != "lebesgue":
        starts_u = stationary_starts(system, N, seed, "delta-starts", burn_in)
        starts_c = conditional_starts(system, target, N, seed, "delta-cond-starts", burn_in)
    uncond = simulate_hitting(system, target, N, seed, rescale=mass, cutoff=K, starts=starts_u,
                              tag="delta-unconditional", workers=workers)
    cond = simulate_hitting(system, target, N, seed, rescale=mass, cutoff=K, conditional=True,
                            starts=starts_c, tag="delta-conditional", workers=workers)
    return delta_from_batches(uncond, cond, K, mass)


# ------------------------------------------------------------- correlations

@dataclass(frozen=True)
class Observable:
    name: str
    fn: object
    lipschitz: float  # None when not Lipschitz on the circle
    sup: float


OBSERVABLES = {
    "cos": Observable("cos", lambda x: np.cos(2.0 * np.pi * x), 2.0 * np.pi, 1.0),
    "indicator": Observable("indicator", lambda x: ((x >= 0.0) & (x <= 0.25)).astype(float), None, 1.0),
    "sawtooth": Observable("sawtooth", lambda x: np.asarray(x, dtype=float), None, 1.0),
    "constant": Observable("constant", lambda x: np.ones_like(x, dtype=float), 0.0, 1.0),
}


@dataclass
class CorrelationSeries:
    n_grid: list
    estimates: np.ndarray
    stderr: np.ndarray
    psi: Observable
    phi: Observable
    N: int


def correlation_estimator(system, psi, phi, n_grid, N=1_000_000, seed=0, burn_in=None):
    """Monte Carlo ``Cov(psi(x), phi(x_n))`` with ``x`` stationary.

    The product of means is taken from the same sample, i.e. the estimate
    is the sample covariance.  ``psi`` must be Lipschitz.
    """
    psi = OBSERVABLES[psi] if isinstance(psi, str) else psi
    phi = OBSERVABLES[phi] if isinstance(phi, str) else phi
    if psi.lipschitz is None:
        raise ValueError(f"{psi.name} is not Lipschitz on the circle")
    n_grid = sorted(int(n) for n in n_grid)
    if n_grid and n_grid[0] < 0:
        raise ValueError("lags must be non-negative")
    rng = stream(seed, "correlations")
    drive, x = system.sample_stationary(N, rng, burn_in)
    a = psi.fn(x)
    a = a - a.mean()
    est, se = [], []
    wanted = set(n_grid)
    for n in range(n_grid[-1] + 1 if n_grid else 0):
        if n > 0:
            drive, x = system.push(drive, x, rng)
        if n in wanted:
            b = phi.fn(x)
            prod = a * (b - b.mean())
            est.append(float(prod.mean()))
            se.append(float(prod.std() / math.sqrt(N)))
    return CorrelationSeries(n_grid, np.array(est), np.array(se), psi, phi, N)


def superpoly_fit(series, p_list, sigmas=3.0):
    """For each ``p``: is ``|C(n)| n**p`` non-increasing over the grid tail?

    Magnitudes are first shrunk by ``sigmas`` standard errors (floored at 0),
    so noise-level estimates count as zero.  The tail is the second half of
    the positive lags.  Returns ``{p: passed}``.
    """
    n = np.asarray(series.n_grid, dtype=float)
    mag = np.maximum(np.abs(series.estimates) - sigmas * np.asarray(series.stderr), 0.0)
    pos = n > 0
    n, mag = n[pos], mag[pos]
    tail = slice(len(n) // 2, None)
    out = {}
    for p in p_list:
        v = mag[tail] * n[tail] ** p
        ok = bool(np.all(np.diff(v) <= 1e-15 * np.maximum(v[:-1], 1.0)))
        if ok and v.size and v[0] > 0:
            ok = v[-1] < v[0]
        out[p] = ok
    return out
