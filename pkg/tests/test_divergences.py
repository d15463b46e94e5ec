import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chipo_lab.core import Instance, point_mass
from chipo_lab.divergences import coverage, mixed_chi2_divergence
from chipo_lab.instances import general_lower, illustrative, random_instance

from conftest import simplex_rows


def test_reference_policy_has_unit_coverage():
    inst = random_instance(0, 3, 4).instance
    rep = coverage(inst, inst.pi_ref, eta=0.5)
    assert rep.c_one == pytest.approx(1.0, abs=1e-14)
    assert rep.chi2 == pytest.approx(0.0, abs=1e-14)
    assert rep.kl == pytest.approx(0.0, abs=1e-14)
    assert rep.c_inf == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [3, 10, 100])
def test_point_masses_on_illustrative_instance(n):
    inst = illustrative(n).instance
    assert coverage(inst, point_mass(1, 4, 1)).c_one == pytest.approx(2 * n, rel=1e-14)
    assert coverage(inst, point_mass(1, 4, 0)).c_one == pytest.approx(2.0, rel=1e-14)


def test_kl_matches_hand_sum_and_zero_mass_convention():
    inst = Instance(np.ones(1), np.zeros((1, 3)), 1.0, np.array([[0.5, 0.25, 0.25]]))
    p = np.array([[0.5, 0.5, 0.0]])
    expected = 0.5 * math.log(1.0) + 0.5 * math.log(2.0)
    assert coverage(inst, p).kl == pytest.approx(expected, abs=1e-15)


def test_mass_outside_support_has_infinite_coverage():
    one, _ = general_lower(2.0)
    inst = one.instance
    rep = coverage(inst, point_mass(1, 4, 3))
    assert math.isinf(rep.c_one) and math.isinf(rep.c_inf)
    rep = coverage(inst, point_mass(1, 4, 0))
    assert rep.c_one == pytest.approx(2.0)


def test_smoothed_coverage_limits():
    inst = random_instance(4, 2, 3).instance
    p = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    assert coverage(inst, p, 0.0).c_smoothed == pytest.approx(coverage(inst, p).c_one, rel=1e-14)
    assert coverage(inst, p, 1e12).c_smoothed == pytest.approx(1e-12, rel=1e-6)


def test_negative_eta_rejected():
    inst = random_instance(4, 2, 3).instance
    with pytest.raises(ValueError):
        coverage(inst, inst.pi_ref, -1.0)


@given(st.integers(0, 10_000), simplex_rows(n_rows=2, n_cols=4, min_mass=0.0))
def test_coverage_identities(seed, p):
    inst = random_instance(seed, 2, 4).instance
    rep = coverage(inst, p, eta=0.3)
    assert rep.c_one == pytest.approx(1 + 2 * rep.chi2, rel=1e-12)
    assert rep.c_one >= 1 - 1e-12
    assert rep.chi2 >= -1e-12
    assert rep.kl >= -1e-12
    assert rep.kl <= 2 * rep.chi2 + 1e-10
    assert rep.c_smoothed <= min(rep.c_one, 1 / 0.3) + 1e-12
    assert mixed_chi2_divergence(inst, p, 0.5) == pytest.approx(rep.chi2 + 0.5 * rep.kl)


@given(st.integers(0, 10_000), simplex_rows(n_rows=2, n_cols=3), st.floats(0, 5), st.floats(0, 5))
def test_smoothed_coverage_decreases_in_eta(seed, p, e1, e2):
    inst = random_instance(seed, 2, 3).instance
    lo, hi = sorted((e1, e2))
    assert coverage(inst, p, lo).c_smoothed >= coverage(inst, p, hi).c_smoothed - 1e-12
