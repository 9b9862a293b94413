"""Hitting and return times into balls, batch simulation and recurrence rates."""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .errors import InsufficientData
from .streams import indexed_map, stream
from .torus import Ball, CirclePoint


@dataclass(frozen=True)
class Censored:
    """Marker for an orbit that did not hit within ``cutoff`` steps."""

    cutoff: int


@dataclass(frozen=True)
class HittingSample:
    tau: object  # int or Censored
    rescale: float
    target: Ball
    sample_id: int
    seed: int
    stream_index: int

    @property
    def censored(self):
        return isinstance(self.tau, Censored)


def default_cutoff(ball_mass):
    """Cutoff leaving probability about exp(-50) to censoring."""
    return int(math.ceil(50.0 / ball_mass))


def hitting_time(orbit, target, cutoff):
    """First ``k >= 1`` at which the orbit lies in ``target``.

    Returns ``Censored(cutoff)`` if no iterate up to ``cutoff`` does.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    k = orbit.first_hit(target.center.value, target.radius, int(cutoff))
    return Censored(int(cutoff)) if k is None else k


def return_time(orbit, r, cutoff):
    """Hitting time of the orbit into the ball around its own start."""
    return hitting_time(orbit, Ball(CirclePoint(orbit.value), r), cutoff)


# ------------------------------------------------------------------- batches

@dataclass
class HittingBatch:
    """Hitting times of ``N`` independent orbits into one target.

    ``taus`` holds the hitting time, or the cutoff for censored entries.
    """

    taus: np.ndarray
    censored: np.ndarray
    rescale: float
    target: Ball
    cutoff: int
    seed: int
    tag: str
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.taus)

    @property
    def censor_count(self):
        return int(self.censored.sum())

    def samples(self):
        for i, (t, c) in enumerate(zip(self.taus.tolist(), self.censored.tolist())):
            tau = Censored(self.cutoff) if c else int(t)
            yield HittingSample(tau, self.rescale, self.target, i, self.seed, i)

    def split(self, parts=2):
        """Disjoint sub-batches (contiguous index ranges)."""
        idx = np.array_split(np.arange(len(self)), parts)
        return [
            HittingBatch(self.taus[i], self.censored[i], self.rescale, self.target, self.cutoff, self.seed, self.tag)
            for i in idx
        ]


def _hit_chunk(indices, system, target, cutoff, seed, tag, mode, starts):
    c, r = target.center.value, target.radius
    out = []
    for i in indices:
        rng = stream(seed, tag, i)
        if starts is not None:
            orbit = system.start_at(float(starts[i]), rng)
        elif mode == "conditional":
            orbit = system.start_in_ball(target, rng)
        else:
            orbit = system.start(rng)
        k = orbit.first_hit(c, r, cutoff)
        out.append(-1 if k is None else k)
    return out


def simulate_hitting(system, target, n, seed, *, rescale, cutoff=None, conditional=False,
                     starts=None, tag=None, workers=1):
    """Hitting times of ``n`` orbits started from the invariant measure.

    With ``conditional=True`` the start is drawn from the measure restricted to
    ``target`` (return-time law).  ``starts`` overrides the phase coordinate of
    every sample, which is how systems with an estimated stationary measure
    are fed.  Sample ``i`` uses stream ``(seed, tag, i)``.
    """
    if cutoff is None:
        cutoff = default_cutoff(rescale)
    mode = "conditional" if conditional else "unconditional"
    tag = tag or f"hitting-{mode}"
    if starts is not None and len(starts) < n:
        raise ValueError("need one start per sample")
    raw = np.array(
        indexed_map(_hit_chunk, n, workers, (system, target, int(cutoff), seed, tag, mode, starts)),
        dtype=np.int64,
    )
    if n == 0:
        raw = np.zeros(0, dtype=np.int64)
    censored = raw < 0
    taus = np.where(censored, int(cutoff), raw)
    return HittingBatch(taus, censored, float(rescale), target, int(cutoff), seed, tag,
                        {"mode": mode, "system": system.describe()})


# ------------------------------------------------------- P(tau <= n) <= n mass

@dataclass(frozen=True)
class BoundReport:
    n: int
    fraction: float
    bound: float
    margin: float
    passed: bool
    samples: int


def hitting_upper_bound_check(samples, ball_mass, n):
    """Check ``P(tau <= n) <= n * mass`` with a 3 sigma binomial margin.

    Censored samples count as ``tau > n``; the cutoff must be at least ``n``.
    """
    if isinstance(samples, HittingBatch):
        taus, cens, cutoff = samples.taus, samples.censored, samples.cutoff
    else:
        samples = list(samples)
        taus = np.array([0 if s.censored else s.tau for s in samples], dtype=np.int64)
        cens = np.array([s.censored for s in samples], dtype=bool)
        cutoff = min((s.tau.cutoff for s in samples if s.censored), default=n)
    if cutoff < n and cens.any():
        raise ValueError("cutoff below n makes censored samples ambiguous")
    N = len(taus)
    bound = n * ball_mass
    if N == 0:
        warnings.warn("no samples: bound check is vacuous", RuntimeWarning, stacklevel=2)
        return BoundReport(n, 0.0, bound, 0.0, True, 0)
    fraction = float(np.count_nonzero((taus <= n) & ~cens)) / N
    p = min(bound, 1.0)
    margin = 3.0 * math.sqrt(p * (1.0 - p) / N)
    passed = bound >= 1.0 or fraction <= bound + margin
    return BoundReport(n, fraction, bound, margin, passed, N)


# --------------------------------------------------------------- rate fitting

def ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def suffix_slopes(x, y, min_len=3):
    """OLS slopes over every suffix ``x[j:]`` with at least ``min_len`` points."""
    n = len(x)
    if n < min_len:
        raise InsufficientData(f"need at least {min_len} points, got {n}")
    return [ols_slope(x[j:], y[j:]) for j in range(n - min_len + 1)]


@dataclass
class RateEstimate:
    radii: list
    taus: list
    censored: list
    slope: float
    lower_slope: float
    upper_slope: float

    @property
    def has_censored(self):
        return any(self.censored)


def _check_radii(radii):
    radii = [float(r) for r in radii]
    if any(not 0.0 < r < 0.5 for r in radii):
        raise ValueError("radii must lie in (0, 1/2)")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    return radii


def recurrence_rate(system, x, radii, cutoff=None, seed=0, tag="recurrence-rate"):
    """Scaling exponent of the return time ``tau_r(x)`` in ``1/r``.

    Each radius uses a fresh orbit from ``x`` (fresh noise for random
    systems) on stream ``(seed, tag, radius index)``.  ``cutoff`` is an int,
    a callable of the radius, or None for ``ceil(50 / 2r)``.
    """
    radii = _check_radii(radii)
    taus, cens = [], []
    for i, r in enumerate(radii):
        rng = stream(seed, tag, i)
        orbit = system.start_at(x, rng)
        if cutoff is None:
            cut = default_cutoff(2.0 * r)
        elif callable(cutoff):
            cut = int(cutoff(r))
        else:
            cut = int(cutoff)
        t = return_time(orbit, r, cut)
        cens.append(isinstance(t, Censored))
        taus.append(t.cutoff if cens[-1] else t)
    keep = [i for i, c in enumerate(cens) if not c]
    if len(keep) < 3:
        raise InsufficientData("fewer than 3 uncensored return times")
    lx = [-math.log(radii[i]) for i in keep]
    ly = [math.log(taus[i]) for i in keep]
    slopes = suffix_slopes(lx, ly)
    return RateEstimate(radii, taus, cens, slopes[0], min(slopes), max(slopes))
