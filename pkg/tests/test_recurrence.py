import copy
import math

import numpy as np
import pytest

from hitstats.errors import InsufficientData
from hitstats.recurrence import (
    Censored,
    default_cutoff,
    hitting_time,
    hitting_upper_bound_check,
    ols_slope,
    recurrence_rate,
    return_time,
    simulate_hitting,
    suffix_slopes,
)
from hitstats.streams import stream
from hitstats.systems import AffineOrbit, AffineSystem, ExactCirclePoint, make_system
from hitstats.torus import Ball, in_ball

FAMILIES = ("affine", "random-expanding", "beta", "perturbed")


def test_hitting_time_examples():
    assert hitting_time(AffineOrbit(ExactCirclePoint(1, 10), 2), Ball(0.5, 0.12), 100) == 2
    assert hitting_time(AffineOrbit(ExactCirclePoint(1, 10), 3), Ball(0.9, 0.05), 100) == 2
    o = AffineOrbit(ExactCirclePoint(1, 10), 2)
    assert hitting_time(o, Ball(0.9, 0.01), 1) == Censored(1)
    assert o.steps == 1
    with pytest.raises(ValueError):
        hitting_time(o, Ball(0.9, 0.01), 0)


def test_return_time_examples():
    assert return_time(AffineOrbit(ExactCirclePoint(1, 3), 2), 0.1, 100) == 2
    assert return_time(AffineOrbit(ExactCirclePoint(1, 3), 2), 0.4, 100) == 1
    for r in (0.3, 0.01, 1e-9):
        assert return_time(AffineOrbit(ExactCirclePoint(0, 7), 2), r, 100) == 1


def test_return_time_is_hitting_time_around_start():
    sysm = make_system("random-expanding")
    for i in range(50):
        a = sysm.start(stream(1, "rt", i))
        b = copy.deepcopy(a)
        assert return_time(a, 0.02, 5000) == hitting_time(b, Ball(b.value, 0.02), 5000)


@pytest.mark.parametrize("family", FAMILIES)
def test_first_hit_matches_brute_force_scan(family):
    sysm = make_system(family)
    target = Ball(0.3, 0.03)
    for i in range(40):
        orbit = sysm.start(stream(2, family, i))
        twin = copy.deepcopy(orbit)
        tau = hitting_time(orbit, target, 2000)
        path = twin.trajectory(2000)
        hits = [k for k, x in enumerate(path, start=1) if in_ball(x, target)]
        expected = hits[0] if hits else Censored(2000)
        assert tau == expected
        if hits:
            assert orbit.value == path[tau - 1]


@pytest.mark.parametrize("family", FAMILIES)
def test_hitting_time_monotone_in_radius(family):
    sysm = make_system(family)
    radii = [0.2, 0.1, 0.05, 0.01, 0.002]
    for i in range(30):
        taus = []
        for r in radii:
            orbit = sysm.start(stream(3, family, i))
            t = hitting_time(orbit, Ball(0.7, r), 20_000)
            taus.append(t.cutoff + 1 if isinstance(t, Censored) else t)
        assert all(a <= b for a, b in zip(taus, taus[1:]))


def test_default_cutoff():
    assert default_cutoff(0.01) == 5000
    assert default_cutoff(0.3) == 167


def test_simulate_hitting_is_worker_independent():
    sysm = make_system("random-expanding")
    target = Ball(math.sqrt(2) - 1, 0.02)
    a = simulate_hitting(sysm, target, 400, 7, rescale=0.04, workers=1)
    b = simulate_hitting(sysm, target, 400, 7, rescale=0.04, workers=3)
    assert np.array_equal(a.taus, b.taus)
    assert a.taus.min() >= 1


def test_bound_check_on_doubling():
    target = Ball(0.37, 0.01)
    batch = simulate_hitting(AffineSystem(), target, 100_000, 1, rescale=0.02, cutoff=50)
    rep = hitting_upper_bound_check(batch, 0.02, 10)
    assert rep.bound == pytest.approx(0.2)
    assert rep.passed and rep.fraction <= rep.bound + rep.margin


def test_bound_check_trivial_and_empty():
    target = Ball(0.37, 0.2)
    batch = simulate_hitting(AffineSystem(), target, 100, 1, rescale=0.4, cutoff=10)
    assert hitting_upper_bound_check(batch, 0.4, 3).passed
    with pytest.warns(RuntimeWarning):
        rep = hitting_upper_bound_check([], 0.1, 5)
    assert rep.passed and rep.samples == 0


def test_bound_check_accepts_sample_lists():
    target = Ball(0.37, 0.01)
    batch = simulate_hitting(AffineSystem(), target, 2000, 1, rescale=0.02, cutoff=50)
    a = hitting_upper_bound_check(batch, 0.02, 10)
    b = hitting_upper_bound_check(list(batch.samples()), 0.02, 10)
    assert a == b


def test_ols_and_suffix_slopes():
    x = np.arange(6.0)
    assert ols_slope(x, 3 * x + 1) == pytest.approx(3.0)
    assert len(suffix_slopes(x, x)) == 4
    with pytest.raises(InsufficientData):
        suffix_slopes([1.0, 2.0], [1.0, 2.0])


def test_rate_at_periodic_point_is_zero():
    radii = [2.0**-k for k in range(4, 11)]
    est = recurrence_rate(AffineSystem(), ExactCirclePoint(1, 3), radii)
    assert est.taus == [2] * len(radii)
    assert est.slope == pytest.approx(0.0, abs=1e-12)
    assert est.lower_slope == pytest.approx(0.0, abs=1e-12)
    assert est.upper_slope == pytest.approx(0.0, abs=1e-12)


def test_rate_for_typical_points_is_one():
    radii = [2.0**-k for k in range(5, 13)]
    slopes = [recurrence_rate(AffineSystem(), AffineSystem().start(stream(5, "x", i)).point, radii,
                              seed=5, tag=f"s{i}").slope for i in range(60)]
    assert abs(np.mean(slopes) - 1.0) <= 0.15


def test_rate_all_censored_raises():
    with pytest.raises(InsufficientData):
        recurrence_rate(AffineSystem(), 0.3, [0.01, 0.005, 0.002], cutoff=1, seed=1)


def test_rate_validates_radii():
    with pytest.raises(ValueError):
        recurrence_rate(AffineSystem(), 0.3, [0.01, 0.02, 0.005])
