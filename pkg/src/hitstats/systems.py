"""Random dynamical systems on the circle and their orbit engines.

Integer-slope fibre maps run on exact rationals ``p/q`` with a large odd
denominator: in binary floating point ``x -> 2x mod 1`` shifts the mantissa
out and every orbit reaches 0 after about 53 steps.  With ``q`` coprime to 6
the maps become ``p -> 2p mod q`` and ``p -> 3p mod q`` and orbits of
typical points stay typical for as long as one cares to iterate.

Families provided:

* :class:`AffineSystem` -- deterministic ``x -> m x``.
* :class:`MarkovSkewSystem` -- the two-map system driven either by the
  piecewise-linear base map (``driver="exact_skew"``) or directly by the
  two-state Markov chain of its labels (``driver="markov"``).
* :class:`BetaSystem` -- i.i.d. ``x -> beta x`` with random ``beta``.
* :class:`PerturbedSystem` -- ``x -> m x + lambda`` with uniform noise.
"""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure, SingularChain
from .streams import random_bits
from .torus import circle_dist, wrap

LABEL_MATRIX = ((0.5, 0.5), (1.0 / 3.0, 2.0 / 3.0))
THETA_BREAKS = (0.2, 0.4, 0.6)
FIBER_SWITCH = 0.4
DEFAULT_BITS = 128
BLOCK = 256


# ---------------------------------------------------------------- exact points

@dataclass(frozen=True)
class ExactCirclePoint:
    """The rational ``numerator / denominator`` on the circle.

    Randomly generated points always have ``gcd(denominator, 6) == 1``; points
    built by hand (``1/3`` say) may have any positive denominator.
    """

    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator < 1:
            raise ValueError("denominator must be positive")
        if not 0 <= self.numerator < self.denominator:
            raise ValueError("need 0 <= numerator < denominator")

    @property
    def value(self):
        return self.numerator / self.denominator

    def __float__(self):
        return self.value

    @property
    def fraction(self):
        return Fraction(self.numerator, self.denominator)

    @property
    def coprime_to_6(self):
        return math.gcd(self.denominator, 6) == 1

    def times(self, m):
        return ExactCirclePoint((m * self.numerator) % self.denominator, self.denominator)


def random_denominator(rng, bits=DEFAULT_BITS):
    q = random_bits(rng, bits) | (1 << (bits - 1)) | 1
    while q % 3 == 0:
        q += 2
    return q


def random_exact_point(rng, bits=DEFAULT_BITS):
    """Uniformly distributed exact point with a fresh random denominator."""
    q = random_denominator(rng, bits)
    p = random_bits(rng, bits + 64) % q
    return ExactCirclePoint(p, q)


def exact_point_near(x, rng, bits=DEFAULT_BITS):
    """Exact point within ``1/q`` of the float ``x`` (random ``q``)."""
    q = random_denominator(rng, bits)
    p = round(Fraction(wrap(x)) * q) % q
    return ExactCirclePoint(p, q)


def exact_point_in_arc(center, radius, rng, bits=DEFAULT_BITS):
    """Uniform exact point of the open arc ``B(center, radius)``."""
    q = random_denominator(rng, bits)
    c, r = Fraction(float(center)), Fraction(float(radius))
    lo = math.floor((c - r) * q) + 1
    hi = math.ceil((c + r) * q) - 1
    width = hi - lo + 1
    j = random_bits(rng, bits + 64) % width
    return ExactCirclePoint((lo + j) % q, q)


def as_value(x):
    return x.value if isinstance(x, ExactCirclePoint) else wrap(x)


# ----------------------------------------------------------------- fibre maps

def eval_affine(m, x):
    if isinstance(x, ExactCirclePoint):
        return x.times(m)
    return wrap(m * x)


def eval_beta(beta, x):
    return wrap(beta * as_value(x))


def eval_perturbed(m, eps, x, rng=None, lam=None):
    """``m x + lambda mod 1`` with ``lambda`` uniform on ``[-eps, eps]``.

    Pass ``lam`` to force the noise value; otherwise exactly one draw is
    taken from ``rng``.
    """
    if lam is None:
        lam = rng.uniform(-eps, eps)
    return wrap(m * as_value(x) + lam)


@dataclass(frozen=True)
class FiberMap:
    kind: str
    multiplier: float
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in ("affine", "beta", "perturbed"):
            raise ValueError(f"unknown fibre kind {self.kind!r}")

    @property
    def min_derivative(self):
        return self.multiplier

    def __call__(self, x, rng=None, lam=None):
        if self.kind == "affine":
            return eval_affine(self.multiplier, x)
        if self.kind == "beta":
            return eval_beta(self.multiplier, x)
        return eval_perturbed(self.multiplier, self.noise, x, rng=rng, lam=lam)


T1 = FiberMap("affine", 2)
T2 = FiberMap("affine", 3)


# -------------------------------------------------------- driving dynamics

def eval_theta(omega):
    """Piecewise-linear base map with breakpoints 1/5, 2/5, 3/5."""
    if omega < 0.2:
        w = 2.0 * omega
    elif omega < 0.4:
        w = 3.0 * omega - 0.2
    elif omega < 0.6:
        w = 2.0 * omega - 0.8
    else:
        w = 1.5 * omega - 0.5
    return wrap(w)


def eval_theta_array(omega):
    omega = np.asarray(omega, dtype=float)
    w = np.select(
        [omega < 0.2, omega < 0.4, omega < 0.6],
        [2.0 * omega, 3.0 * omega - 0.2, 2.0 * omega - 0.8],
        1.5 * omega - 0.5,
    )
    w = np.mod(w, 1.0)
    w[w >= 1.0] = 0.0
    return w


def select_fiber(omega):
    return T1 if omega < FIBER_SWITCH else T2


def step_skew(state):
    """One step of the skew product ``(omega, x) -> (theta(omega), T_omega x)``."""
    omega, x = state
    x_new = select_fiber(omega)(x)
    return eval_theta(omega), x_new


def markov_stationary(A):
    """Stationary row vector of an irreducible stochastic matrix."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or np.any(A < 0) or np.max(np.abs(A.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("A must be a square row-stochastic matrix")
    M = A.T - np.eye(n)
    if np.linalg.matrix_rank(M, tol=1e-10) != n - 1:
        raise SingularChain("transition matrix has no unique stationary vector")
    lhs = np.vstack([M, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


# ------------------------------------------------- parameter distributions

@dataclass(frozen=True)
class PointMass:
    value: float

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def from_uniform(self, u):
        return float(self.value)


@dataclass(frozen=True)
class UniformParam:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("need low < high")

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size)

    def from_uniform(self, u):
        return self.low + (self.high - self.low) * u

    def pdf(self, lam):
        return 1.0 / (self.high - self.low)


def expanding_in_average(dist, min_derivative=lambda lam: lam, rtol=1e-8):
    """Integral of ``1 / inf|T'_lambda|`` against the parameter law.

    The family expands in average when the result is below 1.
    """
    if isinstance(dist, PointMass):
        return 1.0 / min_derivative(dist.value)
    val, err = integrate.quad(
        lambda lam: dist.pdf(lam) / min_derivative(lam),
        dist.low,
        dist.high,
        epsabs=0.0,
        epsrel=rtol / 10,
    )
    if not np.isfinite(val) or err > rtol * abs(val):
        raise QuadratureFailure(f"estimated error {err:g} exceeds tolerance")
    return val


def count_periodic_points(m, n):
    """Number of solutions of ``T^n x = x`` for ``x -> m x mod 1``."""
    M = int(m) ** int(n)
    if M > 2**63 - 1:
        raise OverflowError(f"{m}**{n} does not fit in 63 bits")
    return M - 1


# -------------------------------------------------------------------- orbits

class Orbit:
    """Mutable random orbit owned by a single caller.

    ``value`` is the current phase point as a float, ``point`` its native
    representation and ``steps`` the number of fibre maps applied so far.
    """

    steps = 0

    def step(self):
        raise NotImplementedError

    @property
    def value(self):
        raise NotImplementedError

    @property
    def point(self):
        return self.value

    @property
    def drive(self):
        return None

    def advance(self, n):
        if n < 1:
            raise ValueError("n must be positive")
        for _ in range(n):
            self.step()
        return self

    def trajectory(self, n):
        out = []
        for _ in range(n):
            self.step()
            out.append(self.value)
        return out

    def first_hit(self, center, radius, cutoff):
        """First ``k`` in ``1..cutoff`` with the orbit in ``B(center, radius)``.

        Returns ``None`` when the orbit stays outside; the orbit is left at the
        hitting step (or after ``cutoff`` steps).
        """
        c = float(center)
        for k in range(1, cutoff + 1):
            self.step()
            if circle_dist(self.value, c) < radius:
                return k
        return None


class _Uniforms:
    """Block-buffered uniform draws from one generator."""

    __slots__ = ("rng", "buf", "pos")

    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def take(self):
        if self.pos >= len(self.buf):
            self.buf = self.rng.random(BLOCK).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


class AffineOrbit(Orbit):
    def __init__(self, point, m):
        self.p, self.q = point.numerator, point.denominator
        self.m = int(m)
        self.steps = 0

    @property
    def value(self):
        return self.p / self.q

    @property
    def point(self):
        return ExactCirclePoint(self.p, self.q)

    def step(self):
        self.p = self.m * self.p % self.q
        self.steps += 1

    def first_hit(self, center, radius, cutoff):
        c = float(center)
        p, q, m = self.p, self.q, self.m
        hit = None
        k = 0
        while k < cutoff:
            k += 1
            p = m * p % q
            d = abs(p / q - c)
            if d > 0.5:
                d = 1.0 - d
            if d < radius:
                hit = k
                break
        self.p = p
        self.steps += k
        return hit


class MarkovOrbit(Orbit):
    """Exact fibre orbit whose map labels follow a two-state Markov chain.

    ``label`` is the index of the map applied at the next step.
    """

    def __init__(self, point, label, rng, matrix=LABEL_MATRIX, multipliers=(2, 3)):
        self.p, self.q = point.numerator, point.denominator
        self.label = int(label)
        self.switch = (float(matrix[0][1]), float(matrix[1][1]))
        self.mult = tuple(int(m) for m in multipliers)
        self.u = _Uniforms(rng)
        self.steps = 0

    @property
    def value(self):
        return self.p / self.q

    @property
    def point(self):
        return ExactCirclePoint(self.p, self.q)

    @property
    def drive(self):
        return self.label

    def step(self):
        self.p = self.mult[self.label] * self.p % self.q
        self.label = 1 if self.u.take() < self.switch[self.label] else 0
        self.steps += 1

    def first_hit(self, center, radius, cutoff):
        c = float(center)
        p, q, lab = self.p, self.q, self.label
        m0, m1 = self.mult
        s0, s1 = self.switch
        u = self.u
        buf, pos = u.buf, u.pos
        hit = None
        k = 0
        while k < cutoff:
            k += 1
            p = (m1 if lab else m0) * p % q
            if pos >= len(buf):
                buf = u.rng.random(BLOCK).tolist()
                pos = 0
            lab = 1 if buf[pos] < (s1 if lab else s0) else 0
            pos += 1
            d = abs(p / q - c)
            if d > 0.5:
                d = 1.0 - d
            if d < radius:
                hit = k
                break
        self.p, self.label = p, lab
        u.buf, u.pos = buf, pos
        self.steps += k
        return hit


class SkewOrbit(Orbit):
    """Exact fibre orbit driven by the base map in double precision."""

    def __init__(self, point, omega):
        self.p, self.q = point.numerator, point.denominator
        self.omega = wrap(omega)
        self.steps = 0

    @property
    def value(self):
        return self.p / self.q

    @property
    def point(self):
        return ExactCirclePoint(self.p, self.q)

    @property
    def drive(self):
        return self.omega

    def step(self):
        m = 2 if self.omega < FIBER_SWITCH else 3
        self.p = m * self.p % self.q
        self.omega = eval_theta(self.omega)
        self.steps += 1

    def labels(self, n):
        """Advance ``n`` steps and return the labels (0 for T1, 1 for T2) used."""
        out = np.empty(n, dtype=np.int8)
        for i in range(n):
            out[i] = 0 if self.omega < FIBER_SWITCH else 1
            self.step()
        return out


class BetaOrbit(Orbit):
    def __init__(self, x, rng, dist):
        self.x = wrap(x)
        self.dist = dist
        self.u = _Uniforms(rng)
        self.steps = 0
        self.beta = None

    @property
    def value(self):
        return self.x

    @property
    def drive(self):
        return self.beta

    def step(self):
        self.beta = self.dist.from_uniform(self.u.take())
        self.x = wrap(self.beta * self.x)
        self.steps += 1

    def first_hit(self, center, radius, cutoff):
        c = float(center)
        x = self.x
        lo, span = _affine_params(self.dist)
        u = self.u
        buf, pos = u.buf, u.pos
        hit = None
        k = 0
        beta = self.beta
        while k < cutoff:
            k += 1
            if pos >= len(buf):
                buf = u.rng.random(BLOCK).tolist()
                pos = 0
            beta = lo + span * buf[pos]
            pos += 1
            x = beta * x % 1.0
            if x >= 1.0:
                x = 0.0
            d = abs(x - c)
            if d > 0.5:
                d = 1.0 - d
            if d < radius:
                hit = k
                break
        self.x, self.beta = x, beta
        u.buf, u.pos = buf, pos
        self.steps += k
        return hit


class PerturbedOrbit(Orbit):
    def __init__(self, x, rng, m, eps):
        self.x = wrap(x)
        self.m = m
        self.eps = eps
        self.u = _Uniforms(rng)
        self.steps = 0
        self.lam = None

    @property
    def value(self):
        return self.x

    @property
    def drive(self):
        return self.lam

    def step(self):
        self.lam = self.eps * (2.0 * self.u.take() - 1.0)
        self.x = eval_perturbed(self.m, self.eps, self.x, lam=self.lam)
        self.steps += 1

    def first_hit(self, center, radius, cutoff):
        c = float(center)
        x, m, eps = self.x, self.m, self.eps
        u = self.u
        buf, pos = u.buf, u.pos
        hit = None
        lam = self.lam
        k = 0
        while k < cutoff:
            k += 1
            if pos >= len(buf):
                buf = u.rng.random(BLOCK).tolist()
                pos = 0
            lam = eps * (2.0 * buf[pos] - 1.0)
            pos += 1
            x = (m * x + lam) % 1.0
            if x >= 1.0:
                x = 0.0
            d = abs(x - c)
            if d > 0.5:
                d = 1.0 - d
            if d < radius:
                hit = k
                break
        self.x, self.lam = x, lam
        u.buf, u.pos = buf, pos
        self.steps += k
        return hit


def _affine_params(dist):
    if isinstance(dist, PointMass):
        return float(dist.value), 0.0
    return float(dist.low), float(dist.high - dist.low)


# ------------------------------------------------------------------- systems

class RandomSystem:
    """A driving process, a fibre rule and a sampler for the invariant measure.

    Subclasses provide scalar orbits (``start``, ``start_at``,
    ``start_in_ball``) and a vectorised float step (``initial_batch``,
    ``push``) used for measure estimation and correlation sums.
    """

    name = "system"
    stationary = "lebesgue"
    burn_in = 1000
    exact = False

    def start(self, rng):
        raise NotImplementedError

    def start_at(self, x, rng):
        raise NotImplementedError

    def start_in_ball(self, ball, rng):
        if self.stationary != "lebesgue":
            raise NotImplementedError("conditional starts need a measure estimate")
        c, r = ball.center.value, ball.radius
        return self.start_at(wrap(c - r + 2.0 * r * _open_uniform(rng)), rng)

    def initial_batch(self, n, rng):
        """``(drive, x)`` arrays with drive ~ P and x uniform."""
        raise NotImplementedError

    def push(self, drive, x, rng):
        raise NotImplementedError

    def sample_stationary(self, n, rng, burn_in=None):
        drive, x = self.initial_batch(n, rng)
        if self.stationary != "lebesgue":
            for _ in range(self.burn_in if burn_in is None else burn_in):
                drive, x = self.push(drive, x, rng)
        return drive, x

    def exact_batch(self, n, rng):
        """``(drive, p, q)`` with object arrays of exact numerators/denominators."""
        drive, _ = self.initial_batch(n, rng)
        pts = [random_exact_point(rng, self.bits) for _ in range(n)]
        p = np.array([pt.numerator for pt in pts], dtype=object)
        q = np.array([pt.denominator for pt in pts], dtype=object)
        return drive, p, q

    def push_exact(self, drive, p, q, rng):
        drive, mult = self._multipliers(drive, rng)
        return drive, (mult.astype(object) * p) % q

    def describe(self):
        return {"family": self.name}


def _open_uniform(rng):
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def _wrap_array(x):
    x = np.mod(x, 1.0)
    x[x >= 1.0] = 0.0
    return x


@dataclass(frozen=True)
class AffineSystem(RandomSystem):
    """Deterministic ``x -> m x mod 1`` with Lebesgue measure."""

    multiplier: int = 2
    bits: int = DEFAULT_BITS
    name = "affine"
    exact = True

    def start(self, rng):
        return AffineOrbit(random_exact_point(rng, self.bits), self.multiplier)

    def start_at(self, x, rng=None):
        if not isinstance(x, ExactCirclePoint):
            x = exact_point_near(x, rng, self.bits)
        return AffineOrbit(x, self.multiplier)

    def start_in_ball(self, ball, rng):
        return AffineOrbit(exact_point_in_arc(ball.center, ball.radius, rng, self.bits), self.multiplier)

    def initial_batch(self, n, rng):
        return None, rng.random(n)

    def push(self, drive, x, rng):
        return None, _wrap_array(self.multiplier * x)

    def push_exact(self, drive, p, q, rng):
        return None, (self.multiplier * p) % q

    def describe(self):
        return {"family": self.name, "multiplier": self.multiplier}


@dataclass(frozen=True)
class MarkovSkewSystem(RandomSystem):
    """Maps ``2x`` and ``3x`` chosen along the skew product over the base map.

    With ``driver="markov"`` the label process is sampled from its transition
    matrix; with ``driver="exact_skew"`` the base coordinate is iterated.
    Leb x Leb is invariant in both cases.
    """

    driver: str = "markov"
    bits: int = DEFAULT_BITS
    matrix: tuple = LABEL_MATRIX
    multipliers: tuple = (2, 3)
    name = "random-expanding"
    exact = True

    def __post_init__(self):
        if self.driver not in ("markov", "exact_skew"):
            raise ValueError(f"unknown driver {self.driver!r}")

    @property
    def label_law(self):
        return markov_stationary(self.matrix)

    def _orbit(self, point, rng):
        if self.driver == "markov":
            label = 0 if rng.random() < self.label_law[0] else 1
            return MarkovOrbit(point, label, rng, self.matrix, self.multipliers)
        return SkewOrbit(point, rng.random())

    def start(self, rng):
        return self._orbit(random_exact_point(rng, self.bits), rng)

    def start_at(self, x, rng):
        if not isinstance(x, ExactCirclePoint):
            x = exact_point_near(x, rng, self.bits)
        return self._orbit(x, rng)

    def start_in_ball(self, ball, rng):
        return self._orbit(exact_point_in_arc(ball.center, ball.radius, rng, self.bits), rng)

    def initial_batch(self, n, rng):
        if self.driver == "markov":
            drive = (rng.random(n) >= self.label_law[0]).astype(np.int8)
        else:
            drive = rng.random(n)
        return drive, rng.random(n)

    def _multipliers(self, drive, rng):
        """Multipliers applied this step and the next drive state."""
        if self.driver == "markov":
            mult = np.where(drive == 1, self.multipliers[1], self.multipliers[0])
            switch = np.where(drive == 1, self.matrix[1][1], self.matrix[0][1])
            return (rng.random(len(drive)) < switch).astype(np.int8), mult
        mult = np.where(drive < FIBER_SWITCH, self.multipliers[0], self.multipliers[1])
        return eval_theta_array(drive), mult

    def push(self, drive, x, rng):
        drive, mult = self._multipliers(drive, rng)
        return drive, _wrap_array(mult * x)

    def describe(self):
        return {"family": self.name, "driver": self.driver}


@dataclass(frozen=True)
class BetaSystem(RandomSystem):
    """i.i.d. ``x -> beta x mod 1`` with ``beta`` uniform on ``[low, high]``."""

    low: float = 2.0
    high: float = 3.0
    burn_in: int = 1000
    name = "beta"
    stationary = "empirical"

    def __post_init__(self):
        if not 1.0 < self.low < self.high:
            raise ValueError("need 1 < low < high")

    @property
    def dist(self):
        return UniformParam(self.low, self.high)

    def fiber(self, beta):
        return FiberMap("beta", beta)

    def start(self, rng):
        orbit = BetaOrbit(rng.random(), rng, self.dist)
        for _ in range(self.burn_in):
            orbit.step()
        orbit.steps = 0
        return orbit

    def start_at(self, x, rng):
        return BetaOrbit(as_value(x), rng, self.dist)

    def initial_batch(self, n, rng):
        return None, rng.random(n)

    def push(self, drive, x, rng):
        beta = rng.uniform(self.low, self.high, len(x))
        return None, _wrap_array(beta * x)

    def describe(self):
        return {"family": self.name, "beta_min": self.low, "beta_max": self.high}


@dataclass(frozen=True)
class PerturbedSystem(RandomSystem):
    """``x -> m x + lambda mod 1``, ``lambda`` uniform on ``[-eps, eps]``.

    Lebesgue measure is stationary: the base map preserves it and adding
    independent noise on the circle does too.
    """

    multiplier: int = 2
    eps: float = 0.1
    name = "perturbed"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def fiber(self):
        return FiberMap("perturbed", self.multiplier, self.eps)

    def start(self, rng):
        return PerturbedOrbit(rng.random(), rng, self.multiplier, self.eps)

    def start_at(self, x, rng):
        return PerturbedOrbit(as_value(x), rng, self.multiplier, self.eps)

    def initial_batch(self, n, rng):
        return None, rng.random(n)

    def push(self, drive, x, rng):
        lam = rng.uniform(-self.eps, self.eps, len(x))
        return None, _wrap_array(self.multiplier * x + lam)

    def describe(self):
        return {"family": self.name, "multiplier": self.multiplier, "epsilon": self.eps}


def make_system(family, **params):
    """Build a system from its family id and keyword parameters."""
    if family == "affine":
        return AffineSystem(int(params.get("multiplier", 2)), int(params.get("bits", DEFAULT_BITS)))
    if family == "random-expanding":
        return MarkovSkewSystem(params.get("driver", "markov"), int(params.get("bits", DEFAULT_BITS)))
    if family == "beta":
        return BetaSystem(
            float(params.get("beta_min", 2.0)),
            float(params.get("beta_max", 3.0)),
            int(params.get("burn_in", 1000)),
        )
    if family == "perturbed":
        return PerturbedSystem(int(params.get("multiplier", 2)), float(params.get("epsilon", 0.1)))
    raise ValueError(f"unknown family {family!r}")
