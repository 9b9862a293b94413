"""Stationary-measure estimates, ball masses, local dimensions, annulus checks."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .errors import InsufficientData, RejectionStall, ZeroMass
from .recurrence import suffix_slopes
from .streams import stream
from .torus import Ball, CirclePoint

MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class MeasureEstimate:
    """Either Lebesgue measure or the empirical law of a sorted sample."""

    kind: str
    samples: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("analytic_lebesgue", "empirical"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "empirical":
            s = np.sort(np.asarray(self.samples, dtype=float))
            if s.size == 0:
                raise ValueError("empirical estimate needs at least one sample")
            if s[0] < 0.0 or s[-1] >= 1.0:
                raise ValueError("samples must lie in [0, 1)")
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)

    @property
    def N(self):
        return None if self.kind == "analytic_lebesgue" else len(self.samples)

    def arc_count(self, center, radius):
        """Number of samples at circle distance ``< radius`` from ``center``."""
        c = float(center)
        s = self.samples
        lo, hi = c - radius, c + radius
        pieces = [(lo, hi)]
        if lo < 0.0:
            pieces = [(0.0, hi), (lo + 1.0, 1.0)]
        elif hi > 1.0:
            pieces = [(lo, 1.0), (0.0, hi - 1.0)]
        count = 0
        for a, b in pieces:
            # widen by one ulp-ish margin, then filter with the exact metric
            i = np.searchsorted(s, a - 1e-12, side="left")
            j = np.searchsorted(s, b + 1e-12, side="right")
            cand = s[i:j]
            if cand.size:
                d = np.abs(cand - c)
                d = np.minimum(d, 1.0 - d)
                count += int(np.count_nonzero(d < radius))
        return count

    def ball_mass(self, b):
        if self.kind == "analytic_lebesgue":
            return 2.0 * b.radius
        return self.arc_count(b.center, b.radius) / self.N

    def ball_mass_stderr(self, b):
        if self.kind == "analytic_lebesgue":
            return 0.0
        p = self.ball_mass(b)
        return math.sqrt(p * (1.0 - p) / self.N)

    def annulus_mass(self, center, outer, inner):
        if self.kind == "analytic_lebesgue":
            return 2.0 * (min(outer, 0.5) - min(inner, 0.5))
        n_out = self.arc_count(center, outer) if outer < 0.5 else self.N
        n_in = self.arc_count(center, inner) if inner > 0 else 0
        return (n_out - n_in) / self.N


LEBESGUE = MeasureEstimate("analytic_lebesgue")


def ball_mass(est, b):
    return est.ball_mass(b)


def estimate_stationary(system, burn_in=1000, N=100_000, seed=0, force_empirical=False):
    """Stationary measure of ``system``.

    Systems known to preserve Lebesgue measure get the analytic estimate
    unless ``force_empirical``; the others are sampled by running ``N``
    independent orbits for ``burn_in`` steps from uniform starts.
    """
    if system.stationary == "lebesgue" and not force_empirical:
        return MeasureEstimate("analytic_lebesgue", provenance={"system": system.describe()})
    rng = stream(seed, "stationary")
    if system.exact:
        # integer multipliers shift float mantissas out; iterate exactly
        drive, p, q = system.exact_batch(N, rng)
        for _ in range(burn_in):
            drive, p = system.push_exact(drive, p, q, rng)
        x = np.array([pi / qi for pi, qi in zip(p, q)], dtype=float)
        x[x >= 1.0] = 0.0
    else:
        drive, x = system.initial_batch(N, rng)
        for _ in range(burn_in):
            drive, x = system.push(drive, x, rng)
    prov = {"system": system.describe(), "burn_in": burn_in, "seed": seed}
    return MeasureEstimate("empirical", x, prov)


def stationary_starts(system, n, seed, tag, burn_in=None):
    """``n`` phase points distributed as the stationary measure."""
    _, x = system.sample_stationary(n, stream(seed, tag), burn_in)
    return x


def conditional_starts(system, ball, n, seed, tag, burn_in=None, batch=200_000):
    """Rejection sample of ``n`` stationary phase points inside ``ball``."""
    rng = stream(seed, tag)
    accepted, generated, total = [], 0, 0
    while total < n:
        _, x = system.sample_stationary(batch, rng, burn_in)
        d = np.abs(x - ball.center.value)
        d = np.minimum(d, 1.0 - d)
        hit = x[d < ball.radius]
        accepted.append(hit)
        total += hit.size
        generated += batch
        if generated >= 1.0 / MIN_ACCEPTANCE and total / generated < MIN_ACCEPTANCE:
            raise RejectionStall(f"acceptance rate {total / generated:.3g} below {MIN_ACCEPTANCE:g}")
        if total == 0 and generated >= 10.0 / MIN_ACCEPTANCE:
            raise RejectionStall("no sample landed in the target ball")
    return np.concatenate(accepted)[:n]


def stationarity_pvalue(est, system, seed=0):
    """Two-sample KS p-value between the sample and its one-step image."""
    if est.kind != "empirical":
        raise ValueError("stationarity check applies to empirical estimates")
    rng = stream(seed, "stationarity-check")
    drive, _ = system.initial_batch(est.N, rng)
    _, pushed = system.push(drive, np.array(est.samples), rng)
    return float(stats.ks_2samp(est.samples, pushed).pvalue)


def uniformity_pvalue(samples):
    return float(stats.kstest(samples, "uniform").pvalue)


# ----------------------------------------------------------- local dimension

@dataclass
class DimensionEstimate:
    point: CirclePoint
    radii: list
    masses: list
    slope: float
    lower_dim: float
    upper_dim: float


def pointwise_dimension(est, y, radii):
    """Slope of ``log nu(B(y, r))`` against ``log r`` over decreasing radii.

    ``lower_dim`` and ``upper_dim`` are the extreme slopes over all trailing
    windows of at least three radii.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise InsufficientData("need at least 3 radii")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    y = y if isinstance(y, CirclePoint) else CirclePoint(y)
    masses = [est.ball_mass(Ball(y, r)) for r in radii]
    if min(masses) <= 0.0:
        raise ZeroMass("a ball has zero estimated mass")
    lx = np.log(radii)
    ly = np.log(masses)
    slopes = suffix_slopes(lx, ly)
    return DimensionEstimate(y, radii, masses, slopes[0], min(slopes), max(slopes))


# ------------------------------------------------------------ annulus check

@dataclass
class AnnulusReport:
    point: CirclePoint
    a: float
    b: float
    cells: list  # (r, rho, mass, bound, ratio)
    worst_ratio: float
    passed: bool


def annulus_check(est, y, a, b, r_grid, rho_grid):
    """Test ``nu(B(y,r) \\ B(y,r-rho)) <= r**-b * rho**a`` on a grid.

    Cells are the pairs with ``0 < rho < r``.  For an empirical estimate a
    cell passes when the mass is within 3 binomial standard errors of the
    bound.
    """
    if a <= 0 or b < 0:
        raise ValueError("need a > 0 and b >= 0")
    y = y if isinstance(y, CirclePoint) else CirclePoint(y)
    cells = []
    passed = True
    for r in r_grid:
        for rho in rho_grid:
            if not 0.0 < rho < r:
                continue
            mass = est.annulus_mass(y, r, r - rho)
            bound = r ** (-b) * rho ** a
            margin = 0.0
            if est.kind == "empirical":
                margin = 3.0 * math.sqrt(max(mass * (1.0 - mass), 1.0 / est.N) / est.N)
            ratio = mass / bound
            cells.append((float(r), float(rho), mass, bound, ratio))
            if mass > bound + margin:
                passed = False
    if not cells:
        raise ValueError("grid has no cell with 0 < rho < r")
    worst = max(c[4] for c in cells)
    return AnnulusReport(y, float(a), float(b), cells, worst, passed)
