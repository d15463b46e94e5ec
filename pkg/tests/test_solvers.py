import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chipo_lab.core import Instance, SolverError
from chipo_lab.games import simplex_grid
from chipo_lab.instances import illustrative, random_instance
from chipo_lab.links import KL, AlphaMixed, MixedChi2, link_inverse, link_value
from chipo_lab.solvers import (
    f_divergence_density,
    mirror_identity_residual,
    mirror_step,
    normalize_rows,
    regularized_objective,
    smoothed_chi2_rows,
    smoothed_kkt_residual,
    smoothed_objective,
    solve_regularized,
    solve_smoothed_chi2,
)

LINKS = [KL(), MixedChi2(1.0), MixedChi2(0.3), AlphaMixed(0.5, 1.0), AlphaMixed(0.8, 0.2)]


def projected_gradient_oracle(ref, reward, beta, steps=200_000, lr=1e-4):
    """Projected gradient ascent on sum p r - beta sum ref * f(p / ref) with f(z) = (z-1)^2/2 + z log z."""

    def project(v):
        u = np.sort(v)[::-1]
        css = np.cumsum(u)
        k = np.flatnonzero(u - (css - 1) / np.arange(1, v.size + 1) > 0)[-1]
        return np.maximum(v - (css[k] - 1) / (k + 1), 1e-300)

    p = ref.copy()
    for _ in range(steps):
        z = p / ref
        grad = reward - beta * (z + np.log(z))
        new = project(p + lr * grad)
        if np.max(np.abs(new - p)) < 1e-16:
            break
        p = new
    return p


def test_constant_reward_returns_reference_policy():
    inst = random_instance(1, 3, 5).instance
    r = np.full(inst.shape, 0.7)
    for beta in (0.01, 1.0, 50.0):
        res = solve_regularized(inst, r, beta, MixedChi2(1.0))
        assert np.max(np.abs(res.policy - inst.pi_ref)) <= 1e-10
        assert np.allclose(res.z, 0.7 - beta, atol=1e-9)
        assert np.max(np.abs(solve_regularized(inst, r, beta, KL()).policy - inst.pi_ref)) <= 1e-12


def test_illustrative_chipo_policy_matches_projected_gradient():
    ni = illustrative(10)
    inst, r2 = ni.instance, ni.reward_class[1]
    got = solve_regularized(inst, r2, 0.05, MixedChi2(1.0)).policy[0]
    # the optimum of a strongly concave problem: use a closed-form stationarity check and an iterative oracle
    oracle = projected_gradient_oracle(inst.pi_ref[0], r2[0], 0.05, steps=400_000, lr=2e-4)
    assert np.max(np.abs(got - oracle)) <= 1e-6


def test_kl_solution_is_softmax():
    inst = random_instance(2, 2, 4).instance
    r = np.random.default_rng(0).uniform(size=inst.shape)
    beta = 0.3
    w = inst.pi_ref * np.exp(r / beta)
    expect = w / w.sum(axis=1, keepdims=True)
    assert np.allclose(solve_regularized(inst, r, beta, KL()).policy, expect, rtol=0, atol=1e-14)


def test_single_action_rows_return_reference():
    res = normalize_rows(np.ones((2, 1)), np.array([[0.3], [2.0]]), 0.5, MixedChi2(1.0))
    assert res.policy.tolist() == [[1.0], [1.0]]
    assert np.allclose(res.z, np.array([0.3, 2.0]) - 0.5 * link_value(MixedChi2(1.0), 1.0))


def test_support_aware_rows_leave_zero_mass():
    ni = illustrative(2)
    res = solve_regularized(ni.instance, ni.reward_class[1], 0.1, MixedChi2(1.0))
    assert res.policy[0, 3] == 0.0
    assert res.policy.sum() == pytest.approx(1.0, abs=1e-12)


def test_extreme_rewards_still_normalize():
    inst = random_instance(7, 2, 4).instance
    r = np.array([[1e4, -1e4, 0.0, 5.0], [-300.0, 300.0, 1.0, 2.0]])
    for spec in LINKS:
        res = solve_regularized(inst, r, 1e-3, spec)
        assert res.residual <= 1e-10
        assert np.allclose(res.policy.sum(axis=1), 1.0, atol=1e-12)


def test_invalid_beta_rejected():
    inst = random_instance(7, 2, 4).instance
    with pytest.raises(ValueError):
        solve_regularized(inst, inst.r_star, 0.0, MixedChi2())


@given(st.integers(0, 10_000), st.floats(0.01, 10.0))
def test_density_ratio_bounds_for_mixed_link(seed, beta):
    ni = random_instance(seed, 3, 5, r_max=2.0)
    inst = ni.instance
    pol = solve_regularized(inst, inst.r_star, beta, MixedChi2(1.0)).policy
    ratio = pol / inst.pi_ref
    rmax = inst.r_max
    assert ratio.max() <= 1 + rmax / beta + 1e-9
    assert ratio.min() >= math.exp(-math.e) * math.exp(-rmax / beta) * (1 - 1e-9)


@given(st.integers(0, 10_000), st.floats(0.05, 10.0))
def test_kl_ratio_bounds(seed, beta):
    inst = random_instance(seed, 3, 5).instance
    pol = solve_regularized(inst, inst.r_star, beta, KL()).policy
    ratio = pol / inst.pi_ref
    assert ratio.max() <= math.exp(inst.r_max / beta) * (1 + 1e-12)
    assert ratio.min() >= math.exp(-inst.r_max / beta) / math.e


@pytest.mark.parametrize("spec", LINKS, ids=lambda s: s.name)
@given(seed=st.integers(0, 10_000), beta=st.floats(0.05, 5.0))
def test_reward_to_policy_round_trip(spec, seed, beta):
    rng = np.random.default_rng(seed)
    inst = random_instance(seed, 3, 4).instance
    target = rng.dirichlet(np.ones(4), size=3)
    target = np.maximum(target, 1e-4)
    target /= target.sum(axis=1, keepdims=True)
    r = beta * link_value(spec, target / inst.pi_ref)
    got = solve_regularized(inst, r, beta, spec).policy
    assert np.max(np.abs(got - target)) <= 1e-8


@pytest.mark.parametrize("spec", [KL(), MixedChi2(1.0), AlphaMixed(0.5, 0.5)], ids=lambda s: s.name)
def test_solution_beats_random_perturbations(spec):
    rng = np.random.default_rng(3)
    inst = random_instance(11, 2, 4).instance
    beta = 0.4
    best = solve_regularized(inst, inst.r_star, beta, spec).policy
    top = regularized_objective(inst, best, inst.r_star, beta, spec)
    for _ in range(1000):
        scale = 10 ** rng.uniform(-6, -1)
        cand = np.maximum(best + scale * rng.normal(size=best.shape), 1e-12)
        cand /= cand.sum(axis=1, keepdims=True)
        assert regularized_objective(inst, cand, inst.r_star, beta, spec) <= top + 1e-12


def test_divergence_generator_derivative_is_the_link():
    z = np.array([0.01, 0.5, 1.0, 3.0, 40.0])
    h = 1e-6
    for spec in LINKS[:4]:
        fd = (f_divergence_density(spec, z + h) - f_divergence_density(spec, z - h)) / (2 * h)
        assert np.allclose(fd, link_value(spec, z), rtol=1e-5, atol=1e-5)


# smoothed chi-squared ----------------------------------------------------------------

def test_smoothed_constant_reward_without_smoothing_is_reference():
    inst = random_instance(5, 3, 4).instance
    pol = solve_smoothed_chi2(inst, np.full(inst.shape, 0.2), 0.7, 0.0)
    assert np.max(np.abs(pol - inst.pi_ref)) <= 1e-12


def test_smoothed_huge_beta_is_reference():
    inst = random_instance(5, 3, 4).instance
    pol = solve_smoothed_chi2(inst, inst.r_star, 1e6, 0.1)
    assert np.max(np.abs(pol - inst.pi_ref)) <= 1e-4


def test_smoothed_matches_simplex_grid_oracle():
    rng = np.random.default_rng(8)
    grid = simplex_grid(3, 1000)
    for _ in range(5):
        ref = rng.dirichlet(np.ones(3))
        r = rng.uniform(size=3)
        res = smoothed_chi2_rows(ref[None], r[None], 0.5, 0.1)
        got = smoothed_objective(ref, r, res.policy[0], 0.5, 0.1)
        brute = smoothed_objective(ref, r, grid, 0.5, 0.1).max()
        assert got >= brute - 1e-12
        assert got - brute <= 1e-3
        assert res.kkt_residual <= 1e-8


def test_smoothed_kkt_residual_flags_wrong_policy():
    ref = np.array([[0.2, 0.3, 0.5]])
    r = np.array([[0.9, 0.1, 0.4]])
    res = smoothed_chi2_rows(ref, r, 0.3, 0.05)
    assert float(smoothed_kkt_residual(ref, r, res.policy, res.lam, 0.3, 0.05)[0]) <= 1e-8
    assert float(smoothed_kkt_residual(ref, r, ref, res.lam, 0.3, 0.05)[0]) > 1e-3


def test_smoothed_rejects_bad_parameters():
    with pytest.raises(ValueError):
        smoothed_chi2_rows(np.ones((1, 2)) / 2, np.zeros((1, 2)), 0.0, 0.1)
    with pytest.raises(ValueError):
        smoothed_chi2_rows(np.ones((1, 2)) / 2, np.zeros((1, 2)), 1.0, -0.1)


@given(st.integers(0, 10_000), st.floats(0.01, 5.0), st.floats(0.0, 3.0))
def test_smoothed_kkt_property(seed, beta, eta):
    rng = np.random.default_rng(seed)
    ref = rng.dirichlet(np.ones(4), size=2)
    r = rng.uniform(size=(2, 4))
    res = smoothed_chi2_rows(ref, r, beta, eta)
    assert res.kkt_residual <= 1e-8
    assert np.allclose(res.policy.sum(axis=1), 1.0, atol=1e-12)


# mirror step ---------------------------------------------------------------------------

def test_mirror_fixed_point():
    inst = random_instance(9, 2, 3).instance
    res = mirror_step(inst, inst.pi_ref, np.zeros(inst.shape), 0.5, 0.2)
    assert np.max(np.abs(res.policy - inst.pi_ref)) <= 1e-12


def test_mirror_with_huge_step_matches_one_shot_solve():
    inst = random_instance(9, 2, 3).instance
    rng = np.random.default_rng(1)
    pi_t = rng.dirichlet(np.ones(3), size=2)
    r = rng.uniform(size=(2, 3))
    got = mirror_step(inst, pi_t, r, 0.3, 1e9).policy
    want = solve_regularized(inst, r, 0.3, MixedChi2(1.0)).policy
    assert np.max(np.abs(got - want)) <= 1e-5


def test_mirror_identity_on_random_instance():
    inst = random_instance(13, 2, 3).instance
    rng = np.random.default_rng(2)
    pi_t = rng.dirichlet(np.ones(3), size=2)
    r = rng.uniform(-1, 1, size=(2, 3))
    nxt = mirror_step(inst, pi_t, r, 0.2, 0.5).policy
    assert mirror_identity_residual(inst, nxt, pi_t, r, 0.2, 0.5) <= 1e-8


def test_mirror_rejects_zero_mass_iterate():
    inst = random_instance(13, 1, 3).instance
    with pytest.raises(ValueError):
        mirror_step(inst, np.array([[1.0, 0.0, 0.0]]), np.zeros((1, 3)), 0.2, 0.5)


@given(st.integers(0, 10_000), st.floats(0.05, 5.0), st.floats(0.01, 50.0))
def test_mirror_identity_property(seed, beta, eta):
    rng = np.random.default_rng(seed)
    inst = random_instance(seed, 2, 4).instance
    pi_t = rng.dirichlet(np.ones(4), size=2)
    pi_t = np.maximum(pi_t, 1e-3)
    pi_t /= pi_t.sum(axis=1, keepdims=True)
    r = rng.uniform(-1, 1, size=(2, 4))
    nxt = mirror_step(inst, pi_t, r, beta, eta).policy
    assert mirror_identity_residual(inst, nxt, pi_t, r, beta, eta) <= 1e-8


@pytest.mark.parametrize("beta", [1e-30, 1e-300, 5e-324])
def test_vanishing_beta_gives_greedy_policy(beta):
    ni = illustrative(10)
    for link in (KL(), MixedChi2(1.0), MixedChi2(0.2)):
        res = solve_regularized(ni.instance, ni.reward_class[1], beta, link)
        assert np.array_equal(res.policy, [[0.0, 0.0, 1.0, 0.0]])
        assert np.isfinite(res.z).all()
    for eta in (0.0, 0.1):
        assert np.array_equal(smoothed_chi2_rows(ni.instance.pi_ref, ni.reward_class[1], beta, eta).policy,
                              [[0.0, 0.0, 1.0, 0.0]])


def test_clipped_power_link_reports_unrepresentable_inverse():
    ni = illustrative(10)
    with pytest.raises(SolverError):
        solve_regularized(ni.instance, ni.reward_class[1], 1e-300, AlphaMixed(0.5, 1.0))
