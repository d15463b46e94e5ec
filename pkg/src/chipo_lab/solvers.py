"""Exact maximizers of regularized tabular objectives.

Every solver works per context.  For a link ``phi = f'`` the maximizer of
``E_pi[r] - beta * D_f(pi || pi_ref)`` satisfies
``pi(a|x) = pi_ref(a|x) * phi^{-1}((r(x,a) - Z(x)) / beta)``; the row sum is
strictly decreasing in ``Z`` so the normalizer is found by a bracketed
Newton/bisection hybrid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Instance, SolverError, as_policy
from .links import KL_KIND, LinkSpec, MixedChi2, _dphi_log, link_inverse_log, link_value

log = logging.getLogger(__name__)

Z_TOL = 1e-12
Z_MAX_ITER = 200
SCALED_FLOOR = 1e300
KKT_TOL = 1e-8


@dataclass(frozen=True)
class NormalizationResult:
    policy: np.ndarray
    z: np.ndarray
    residual: float


def _row_mass(log_ref, reward, z, beta, spec, support):
    u = link_inverse_log(spec, (reward - z[:, None]) / beta)
    ratio = np.exp(u)
    mass = np.where(support, np.exp(log_ref + u), 0.0)
    return mass, ratio, u


def normalize_rows(pi_ref, reward, beta: float, spec: LinkSpec) -> NormalizationResult:
    """Solve ``sum_a pi_ref * phi^{-1}((r - Z) / beta) = 1`` for ``Z`` in every row."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    pi_ref = np.asarray(pi_ref, dtype=np.float64)
    reward = np.asarray(reward, dtype=np.float64)
    support = pi_ref > 0
    n_x = pi_ref.shape[0]
    with np.errstate(divide="ignore"):
        log_ref = np.where(support, np.log(np.where(support, pi_ref, 1.0)), -np.inf)

    if spec.kind == KL_KIND:
        r_top = np.where(support, reward, -np.inf).max(axis=1)
        with np.errstate(over="ignore"):
            scaled = np.where(support, log_ref + (reward - r_top[:, None]) / beta, -np.inf)
        lse = logsumexp(scaled, axis=1)
        policy = np.where(support, np.exp(scaled - lse[:, None]), 0.0)
        residual = float(np.max(np.abs(policy.sum(axis=1) - 1.0)))
        policy /= policy.sum(axis=1, keepdims=True)
        return NormalizationResult(as_policy(policy), r_top + beta * lse, residual)

    r_sup_min = np.where(support, reward, np.inf).min(axis=1)
    r_sup_max = np.where(support, reward, -np.inf).max(axis=1)
    ref_min = np.where(support, pi_ref, np.inf).min(axis=1)
    single = support.sum(axis=1) == 1

    # Solve for w = (Z - max r) / beta so the unknown stays O(1) even when
    # rewards are huge relative to beta; Z itself is recovered at the end.
    # tiny beta overflows the scaled gaps; clip them to a huge finite value
    with np.errstate(over="ignore"):
        scaled = np.where(support, np.maximum((reward - r_sup_max[:, None]) / beta, -SCALED_FLOOR), 0.0)
        lo = np.maximum((r_sup_min - r_sup_max) / beta, -SCALED_FLOOR) - link_value(spec, 1.0 / ref_min) - 1.0
    hi = np.abs(link_value(spec, ref_min)) + 1.0
    # rows with one supported action are solved in closed form below
    lo = np.where(single, -link_value(spec, 1.0) - 1.0, lo)
    hi = np.where(single, -link_value(spec, 1.0) + 1.0, hi)

    def excess(w):
        mass, ratio, u = _row_mass(log_ref, scaled, w, 1.0, spec, support)
        return mass.sum(axis=1) - 1.0, mass, ratio, u

    width = hi - lo
    for k in range(60):
        f_lo = excess(lo)[0]
        f_hi = excess(hi)[0]
        bad_lo, bad_hi = f_lo < 0, f_hi > 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo - width * 2.0 ** k, lo)
        hi = np.where(bad_hi, hi + width * 2.0 ** k, hi)
    else:
        raise SolverError(
            "normalizer bracket failed after widening: "
            f"Z in [{(r_sup_max + beta * lo).tolist()}, {(r_sup_max + beta * hi).tolist()}]"
        )

    w = 0.5 * (lo + hi)
    f = np.inf
    for _ in range(Z_MAX_ITER):
        f, mass, ratio, u = excess(w)
        if np.max(np.abs(f)) <= Z_TOL:
            break
        pos = f > 0
        lo = np.where(pos, w, lo)
        hi = np.where(pos, hi, w)
        slope = -np.sum(np.where(support, mass / _dphi_log(spec, u), 0.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            wn = w - f / slope
        out = ~((wn > lo) & (wn < hi)) | ~np.isfinite(wn)
        wn = np.where(out, 0.5 * (lo + hi), wn)
        if np.all((hi - lo) <= 4e-16 * np.maximum(1.0, np.abs(w))):
            break
        w = wn
    f, mass, ratio, u = excess(w)
    z = r_sup_max + beta * w

    if single.any():
        ref1 = np.where(support, pi_ref, 0.0)
        mass[single] = ref1[single]
        z = np.where(single, r_sup_max - beta * link_value(spec, 1.0), z)
        f = np.where(single, 0.0, f)

    residual = float(np.max(np.abs(f))) if n_x else 0.0
    if residual > 1e-10:
        raise SolverError(f"normalizer did not converge (residual {residual:.3e})")
    policy = mass / mass.sum(axis=1, keepdims=True)
    return NormalizationResult(as_policy(policy), z, residual)


def solve_regularized(instance: Instance, reward, beta: float, spec: LinkSpec) -> NormalizationResult:
    """Optimal policy of ``E_pi[reward] - beta * D_f(pi || pi_ref)`` with ``f' = phi``."""
    r = instance.check_shape(reward, "reward")
    return normalize_rows(instance.pi_ref, r, beta, spec)


def f_divergence_density(spec: LinkSpec, z):
    """Convex generator ``f`` with ``f' = phi`` and, for KL and mixed links, ``f(1) = 0``."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        zlogz = np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)
    if spec.kind == KL_KIND:
        return zlogz - z + 1.0
    if spec.kind == "mixed_chi2":
        return 0.5 * (z * z - 1.0) + spec.gamma * (zlogz - z + 1.0)
    a, lo, hi = spec.alpha, spec.clip_lo, spec.clip_hi
    z_lo, z_hi = np.exp(lo / a), np.exp(hi / a)
    mid = lambda t: t ** (a + 1.0) / (a + 1.0)  # noqa: E731
    below = np.exp(lo) * z
    inside = np.exp(lo) * z_lo + mid(np.clip(z, z_lo, z_hi)) - mid(z_lo)
    above = np.exp(lo) * z_lo + mid(z_hi) - mid(z_lo) + np.exp(hi) * (z - z_hi)
    power = np.where(z <= z_lo, below, np.where(z <= z_hi, inside, above))
    return power + spec.gamma * (zlogz - z)


def regularized_objective(instance: Instance, policy, reward, beta: float, spec: LinkSpec) -> float:
    """``E_pi[r] - beta * E_x E_{pi_ref}[f(pi / pi_ref)]`` on the reference support."""
    p = instance.check_shape(policy, "policy")
    r = instance.check_shape(reward, "reward")
    ref = instance.pi_ref
    sup = ref > 0
    ratio = np.where(sup, p / np.where(sup, ref, 1.0), 0.0)
    pen = np.where(sup, ref * f_divergence_density(spec, ratio), 0.0).sum(axis=1)
    return float(instance.rho @ ((p * r).sum(axis=1) - beta * pen))


def _smoothed_g(p, c, eta):
    """Derivative of ``p^2 / (c + eta p)``."""
    return p * (2.0 * c + eta * p) / (c + eta * p) ** 2


def _smoothed_g_inv(v, c, eta):
    """Inverse of ``_smoothed_g`` in ``p``; ``inf`` once ``v >= 1/eta``."""
    s2 = 1.0 - v * eta
    s = np.sqrt(np.maximum(s2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = c * v / (s * (1.0 + s))
    return np.where(s2 > 0, p, np.inf)


def smoothed_objective(pi_ref_row, reward_row, p, beta: float, eta: float):
    """Per-context ``sum p r - beta * sum p^2 / (pi_ref + eta p)``; vectorized over leading axes of ``p``."""
    c = np.asarray(pi_ref_row, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    denom = c + eta * p
    with np.errstate(divide="ignore", invalid="ignore"):
        pen = np.where(p > 0, p * p / np.where(denom > 0, denom, 1.0), 0.0)
    pen = np.where((p > 0) & (denom <= 0), np.inf, pen)
    return (p * reward_row).sum(axis=-1) - beta * pen.sum(axis=-1)


def smoothed_kkt_residual(pi_ref, reward, policy, lam, beta: float, eta: float) -> np.ndarray:
    """Per-context KKT violation of the smoothed chi-squared problem."""
    c = np.asarray(pi_ref, dtype=np.float64)
    p = np.asarray(policy, dtype=np.float64)
    sup = c > 0
    stat = np.where(p > 0, np.abs(reward - beta * _smoothed_g(p, c, eta) - lam[:, None]), 0.0)
    comp = np.where((p == 0) & sup, np.maximum(reward - lam[:, None], 0.0), 0.0)
    off = np.where(~sup, p, 0.0)
    prim = np.abs(p.sum(axis=1) - 1.0)
    return np.maximum.reduce([stat.max(axis=1), comp.max(axis=1), off.max(axis=1), prim])


@dataclass(frozen=True)
class SmoothedResult:
    policy: np.ndarray
    lam: np.ndarray
    kkt_residual: float


def smoothed_chi2_rows(pi_ref, reward, beta: float, eta: float) -> SmoothedResult:
    """Row-wise maximizer of ``sum p r - beta sum p^2 / (pi_ref + eta p)`` over the simplex.

    Stationarity gives ``p = g^{-1}((r - lam) / beta)`` clipped at zero, with
    ``g(p) = p (2c + eta p) / (c + eta p)^2``; ``lam`` is bisected so rows sum to 1.
    Actions outside the reference support get zero mass.
    """
    if not beta > 0 or eta < 0:
        raise ValueError("need beta > 0 and eta >= 0")
    c = np.asarray(pi_ref, dtype=np.float64)
    r = np.asarray(reward, dtype=np.float64)
    sup = c > 0
    r_sup = np.where(sup, r, -np.inf)
    best = r_sup.argmax(axis=1)
    rows = np.arange(c.shape[0])
    r_best = r_sup[rows, best]
    # bisect on t = (lam - r_best) / beta, which lies in [-g(1), 0] and stays O(1) for any beta
    with np.errstate(over="ignore"):
        gaps = np.where(sup, np.maximum((r - r_best[:, None]) / beta, -SCALED_FLOOR), -np.inf)
    lo = -_smoothed_g(1.0, c[rows, best], eta)
    hi = np.zeros_like(lo)

    def mass(t):
        v = np.maximum(gaps - t[:, None], 0.0)
        return np.where(sup, _smoothed_g_inv(v, c, eta), 0.0)

    for _ in range(400):
        mid = 0.5 * (lo + hi)
        s = mass(mid).sum(axis=1)
        big = s > 1.0
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
        if np.all(hi - lo <= 2e-16 * np.maximum(1.0, np.abs(mid))):
            break
    t = 0.5 * (lo + hi)
    lam = r_best + beta * t
    p = mass(t)
    if not np.all(np.isfinite(p)) or np.any(p.sum(axis=1) <= 0):
        raise SolverError("smoothed chi-squared solve produced a degenerate row")
    # absorb the bisection slack in the largest coordinate, where stationarity is flattest
    big = p.argmax(axis=1)
    rest = p.sum(axis=1) - p[rows, big]
    p[rows, big] = 1.0 - rest
    res = float(np.max(smoothed_kkt_residual(c, r, p, lam, beta, eta)))
    if res > KKT_TOL:
        raise SolverError(f"smoothed chi-squared KKT residual {res:.3e} exceeds {KKT_TOL:g}")
    return SmoothedResult(as_policy(p), lam, res)


def solve_smoothed_chi2(instance: Instance, reward, beta: float, eta: float) -> np.ndarray:
    r = instance.check_shape(reward, "reward")
    return smoothed_chi2_rows(instance.pi_ref, r, beta, eta).policy


def mirror_step(instance: Instance, pi_t, reward, beta: float, eta: float,
                spec: LinkSpec | None = None) -> NormalizationResult:
    """One Bregman proximal step for the mixed chi-squared regularizer.

    Returns ``pi`` with ``pi / pi_ref = phi^{-1}([r + (beta/eta) phi(pi_t/pi_ref) - Z] / (beta (1 + 1/eta)))``,
    i.e. the maximizer of ``E_pi[r] - beta D(pi) - (beta/eta) B(pi, pi_t)``.
    """
    spec = spec or MixedChi2(1.0)
    if not (beta > 0 and eta > 0):
        raise ValueError("beta and eta must be positive")
    p_t = instance.check_shape(pi_t, "pi_t")
    r = instance.check_shape(reward, "reward")
    sup = instance.support
    if np.any(p_t[sup] <= 0):
        raise ValueError("pi_t must be strictly positive on the reference support")
    ratio_t = np.where(sup, p_t / np.where(sup, instance.pi_ref, 1.0), 1.0)
    r_eff = r + (beta / eta) * np.where(sup, link_value(spec, ratio_t), 0.0)
    return normalize_rows(instance.pi_ref, r_eff, beta * (1.0 + 1.0 / eta), spec)


def mirror_identity_residual(instance: Instance, pi_next, pi_t, reward, beta: float, eta: float,
                             spec: LinkSpec | None = None) -> float:
    """Max over ``(x, a, b)`` of ``|f_{pi_next, pi_t}(x,a,b) - (r(x,a) - r(x,b))|`` on the support."""
    spec = spec or MixedChi2(1.0)
    sup = instance.support
    ref = np.where(sup, instance.pi_ref, 1.0)
    phi_n = np.where(sup, link_value(spec, np.where(sup, pi_next / ref, 1.0)), 0.0)
    phi_t = np.where(sup, link_value(spec, np.where(sup, pi_t / ref, 1.0)), 0.0)
    g = beta * ((1.0 + 1.0 / eta) * phi_n - phi_t / eta)
    pair = (g[:, :, None] - g[:, None, :]) - (reward[:, :, None] - reward[:, None, :])
    both = sup[:, :, None] & sup[:, None, :]
    return float(np.max(np.abs(np.where(both, pair, 0.0))))
