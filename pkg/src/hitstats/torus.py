"""Geometry of the circle R/Z: points, distance, open balls and annuli."""

from dataclasses import dataclass


def wrap(x):
    """Reduce ``x`` to its representative in [0, 1)."""
    v = float(x) % 1.0
    # tiny negatives round up to 1.0 under fmod
    if v >= 1.0:
        v = 0.0
    return v


@dataclass(frozen=True)
class CirclePoint:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", wrap(self.value))

    def __float__(self):
        return self.value


def circle_dist(x, y):
    """Arc-length distance between two points of the circle, in [0, 1/2]."""
    d = abs(float(x) - float(y)) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class Ball:
    """Open arc ``{x : circle_dist(x, center) < radius}``."""

    center: CirclePoint
    radius: float

    def __post_init__(self):
        if not isinstance(self.center, CirclePoint):
            object.__setattr__(self, "center", CirclePoint(self.center))
        r = float(self.radius)
        if not 0.0 < r < 0.5:
            raise ValueError(f"radius must be in (0, 0.5), got {r}")
        object.__setattr__(self, "radius", r)

    def __contains__(self, x):
        return in_ball(x, self)


@dataclass(frozen=True)
class Annulus:
    """Points in the open outer ball but outside the open inner ball."""

    center: CirclePoint
    outer: float
    inner: float = 0.0

    def __post_init__(self):
        if not isinstance(self.center, CirclePoint):
            object.__setattr__(self, "center", CirclePoint(self.center))
        if not 0.0 <= self.inner < self.outer:
            raise ValueError("need 0 <= inner < outer")

    def __contains__(self, x):
        d = circle_dist(x, self.center)
        return self.inner <= d < self.outer


def in_ball(x, b):
    return circle_dist(x, b.center) < b.radius


def lebesgue_ball_mass(b):
    return 2.0 * b.radius
