import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chipo_lab.core import DomainError
from chipo_lab.links import (
    KL,
    AlphaMixed,
    LinkSpec,
    MixedChi2,
    lambert_w0,
    link_dlog,
    link_inverse,
    link_inverse_log,
    link_value,
)

GRID = np.round(np.arange(-50.0, 50.0 + 1e-9, 0.1), 10)


def bisect_inverse(phi, y, lo=1e-300, hi=1e300, iters=3000):
    """Plain bisection in log-space on an increasing function."""
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if phi(math.exp(mid)) < y:
            a = mid
        else:
            b = mid
        if b - a < 1e-15:
            break
    return math.exp(0.5 * (a + b))


def test_link_values_at_reference_points():
    assert link_value(MixedChi2(1.0), 1.0) == 1.0
    assert link_value(KL(), 1.0) == 0.0
    assert link_value(MixedChi2(1.0), math.e) == pytest.approx(math.e + 1.0, abs=1e-15)
    assert link_value(MixedChi2(0.5), math.e) == pytest.approx(math.e + 0.5, abs=1e-15)
    assert link_value(AlphaMixed(0.5, 1.0), 4.0) == pytest.approx(2.0 + math.log(4.0), abs=1e-15)


def test_link_rejects_non_positive_ratios():
    for spec in (KL(), MixedChi2(), AlphaMixed()):
        with pytest.raises(DomainError):
            link_value(spec, 0.0)
        with pytest.raises(DomainError):
            link_value(spec, np.array([1.0, -2.0]))


def test_link_spec_validation():
    with pytest.raises(ValueError):
        MixedChi2(0.0)
    with pytest.raises(ValueError):
        MixedChi2(1.5)
    with pytest.raises(ValueError):
        AlphaMixed(alpha=2.0)
    with pytest.raises(ValueError):
        AlphaMixed(clip_lo=5.0, clip_hi=5.0)
    with pytest.raises(ValueError):
        LinkSpec("hinge")
    spec = AlphaMixed(0.3, 0.2, -10.0, 5.0)
    assert LinkSpec.from_dict(spec.to_dict()) == spec


def test_lambert_reference_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w0(2 * math.e ** 2) == pytest.approx(2.0, abs=1e-14)
    assert lambert_w0(-1 / math.e) == -1.0
    with pytest.raises(DomainError):
        lambert_w0(-0.5)


def test_lambert_near_branch_point_and_huge_arguments():
    y = np.array([-1 / math.e + 1e-12, -0.3, -1e-8, 1e-300, 1e100, 1e300])
    w = lambert_w0(y)
    assert np.all(w >= -1.0)
    rel = np.abs(w * np.exp(w) - y) / np.maximum(1.0, np.abs(y))
    assert rel[:-2].max() <= 1e-12
    # e^w overflows for the largest inputs; compare in log space
    assert np.allclose(np.log(w[-2:]) + w[-2:], np.log(y[-2:]), rtol=0, atol=1e-12)


def test_inverse_at_one_and_ten():
    assert link_inverse(MixedChi2(1.0), 1.0) == pytest.approx(1.0, abs=1e-12)
    z = link_inverse(MixedChi2(1.0), 10.0)
    assert 5.0 <= z <= 10.0
    oracle = bisect_inverse(lambda t: t + math.log(t), 10.0)
    assert z == pytest.approx(oracle, rel=1e-12)


def test_inverse_below_one_sits_in_exponential_band():
    z = link_inverse(MixedChi2(1.0), -5.0)
    assert math.exp(-5.0 - math.e) <= z <= math.exp(-5.0)


def test_kl_inverse_is_exp():
    assert link_inverse(KL(), 0.0) == 1.0
    assert link_inverse(KL(), 2.5) == pytest.approx(math.exp(2.5))


@pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0])
def test_round_trip_on_grid(gamma):
    spec = MixedChi2(gamma)
    z = link_inverse(spec, GRID)
    assert np.all(z > 0)
    assert np.max(np.abs(link_value(spec, z) - GRID)) <= 1e-10


def test_round_trip_alpha_mixed():
    for spec in (AlphaMixed(0.5, 1.0), AlphaMixed(0.25, 0.1), AlphaMixed(1.0, 0.5, -3.0, 2.0)):
        z = link_inverse(spec, GRID)
        assert np.max(np.abs(link_value(spec, z) - GRID)) <= 1e-10


def test_bracket_bounds_on_grid():
    z = link_inverse(MixedChi2(1.0), GRID)
    hi_side = GRID >= 1
    assert np.all(z[hi_side] >= GRID[hi_side] / 2) and np.all(z[hi_side] <= GRID[hi_side])
    lo = GRID[~hi_side]
    assert np.all(z[~hi_side] >= np.exp(lo - math.e)) and np.all(z[~hi_side] <= np.exp(lo))


def test_inverse_for_large_arguments_beyond_exp_overflow():
    y = np.array([699.0, 701.0, 1e4, 1e8])
    u = link_inverse_log(MixedChi2(1.0), y)
    z = np.exp(u)
    assert np.all(np.abs(z + u - y) <= 1e-10 * np.maximum(1.0, y))


def test_inverse_rejects_non_finite():
    with pytest.raises(DomainError):
        link_inverse(MixedChi2(), np.inf)
    with pytest.raises(DomainError):
        link_inverse(MixedChi2(), np.nan)


def test_inverse_underflow_keeps_log_finite():
    u = link_inverse_log(MixedChi2(1.0), -800.0)
    assert np.isfinite(u) and u == pytest.approx(-800.0, abs=1e-12)


def test_dlog_matches_finite_difference():
    for spec in (KL(), MixedChi2(0.3), AlphaMixed(0.5, 0.7)):
        for z in (0.1, 1.0, 3.0):
            h = 1e-6
            fd = (link_value(spec, z * math.exp(h)) - link_value(spec, z * math.exp(-h))) / (2 * h)
            assert link_dlog(spec, z) == pytest.approx(fd, rel=1e-6)


@given(st.floats(0.01, 1.0), st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=20))
def test_link_is_strictly_increasing(gamma, zs):
    z = np.unique(np.array(zs))
    # inputs a few ulps apart can round to the same log
    separated = np.diff(z) > 1e-12 * z[1:]
    for spec in (MixedChi2(gamma), AlphaMixed(0.5, gamma), KL()):
        step = np.diff(link_value(spec, z))
        assert np.all(step >= 0)
        assert np.all(step[separated] > 0)


@given(st.floats(0.1, 1.0), st.floats(-50, 200))
def test_round_trip_property(gamma, y):
    spec = MixedChi2(gamma)
    assert abs(float(link_value(spec, link_inverse(spec, y))) - y) <= 1e-10


@given(st.floats(0.01, 1.0), st.floats(-1e4, 1e4))
def test_round_trip_in_log_space(gamma, y):
    # far left tail: the ratio itself is subnormal, so compare through log z
    u = float(link_inverse_log(MixedChi2(gamma), y))
    assert abs(math.exp(u) + gamma * u - y) <= 1e-10 * max(1.0, abs(y))


@given(st.floats(0.0, 1e8))
def test_lambert_residual_property(y):
    w = lambert_w0(y)
    assert abs(w * math.exp(w) - y) / max(1.0, y) <= 1e-12
