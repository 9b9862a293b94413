import math

import pytest
from hypothesis import given, settings, strategies as st

from hitstats.torus import Annulus, Ball, CirclePoint, circle_dist, in_ball, lebesgue_ball_mass, wrap

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)
real = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


def test_wrap_examples():
    assert wrap(1.25) == 0.25
    assert wrap(-0.25) == 0.75
    assert wrap(1.0) == 0.0
    assert wrap(-1e-300) == 0.0
    assert CirclePoint(3.5).value == 0.5


def test_distance_examples():
    assert circle_dist(0.1, 0.9) == pytest.approx(0.2)
    assert circle_dist(0.0, 0.5) == 0.5
    assert circle_dist(0.3, 0.3) == 0.0
    assert circle_dist(CirclePoint(0.95), 0.05) == pytest.approx(0.1)


def test_ball_membership_across_zero():
    b = Ball(0.98, 0.05)
    assert 0.01 in b
    assert 0.94 in b
    assert 0.05 not in b
    # open ball: boundary excluded
    assert not in_ball(0.75, Ball(0.5, 0.25))


@pytest.mark.parametrize("r", [0.0, 0.5, -0.1, 0.7])
def test_ball_radius_validation(r):
    with pytest.raises(ValueError):
        Ball(0.2, r)


def test_lebesgue_mass():
    assert lebesgue_ball_mass(Ball(0.3, 0.05)) == pytest.approx(0.1)


def test_annulus_with_zero_inner_is_ball():
    a, b = Annulus(0.3, 0.1), Ball(0.3, 0.1)
    for k in range(1000):
        x = k / 1000
        assert (x in a) == (x in b)


def test_annulus_excludes_inner_ball():
    a = Annulus(0.5, 0.2, 0.1)
    assert 0.65 in a and 0.35 in a
    assert 0.55 not in a and 0.75 not in a
    with pytest.raises(ValueError):
        Annulus(0.5, 0.1, 0.2)


@settings(max_examples=10_000, deadline=None)
@given(unit, unit, unit)
def test_metric_axioms(x, y, z):
    dxy = circle_dist(x, y)
    assert 0.0 <= dxy <= 0.5
    assert dxy == circle_dist(y, x)
    assert circle_dist(x, x) == 0.0
    assert dxy <= circle_dist(x, z) + circle_dist(z, y) + 1e-12


@settings(max_examples=2000, deadline=None)
@given(real, real, st.integers(-5, 5))
def test_distance_is_integer_translation_invariant(x, y, n):
    assert math.isclose(circle_dist(x + n, y), circle_dist(x, y), abs_tol=1e-12)


@settings(max_examples=2000, deadline=None)
@given(unit, unit, st.floats(min_value=-0.4, max_value=0.4))
def test_distance_is_rotation_invariant(x, y, s):
    assert math.isclose(circle_dist(x + s, y + s), circle_dist(x, y), abs_tol=1e-12)
