"""Skew-symmetric preference games: values, best responses, duality gaps, minimax winners."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreferenceFunction:
    """``l(x, a, b) = 2 P(a > b | x) - 1`` as a dense context x action x action tensor."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ShapeError(f"preference tensor must be (contexts, actions, actions), got {v.shape}")
        if np.any(np.abs(v) > 1) or not np.all(np.isfinite(v)):
            raise DomainError("preference values must lie in [-1, 1]")
        if np.any(np.diagonal(v, axis1=1, axis2=2) != 0) or np.any(v + v.transpose(0, 2, 1) != 0):
            raise DomainError("preference function must be exactly skew-symmetric")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @classmethod
    def from_reward(cls, reward) -> "PreferenceFunction":
        """Bradley-Terry preferences ``2 sigmoid(r(a) - r(b)) - 1 = tanh((r(a) - r(b)) / 2)``."""
        r = np.asarray(reward, dtype=np.float64)
        d = r[:, :, None] - r[:, None, :]
        v = np.tanh(d / 2.0)
        # tanh is odd, but enforce exact antisymmetry against rounding
        v = 0.5 * (v - v.transpose(0, 2, 1))
        return cls(v)

    @classmethod
    def zero(cls, n_contexts: int, n_actions: int) -> "PreferenceFunction":
        return cls(np.zeros((n_contexts, n_actions, n_actions)))

    def to_list(self) -> list:
        return self.values.tolist()


def _vals(l) -> np.ndarray:
    return l.values if isinstance(l, PreferenceFunction) else np.asarray(l, dtype=np.float64)


def pref_value(rho, l, pi, pi2) -> float:
    """``E_{x~rho, a~pi(x), b~pi2(x)} l(x, a, b)``."""
    v = _vals(l)
    pi, pi2 = np.asarray(pi, dtype=np.float64), np.asarray(pi2, dtype=np.float64)
    if pi.shape != v.shape[:2] or pi2.shape != v.shape[:2]:
        raise ShapeError("policy shapes do not match the preference tensor")
    return float(np.asarray(rho) @ np.einsum("xa,xab,xb->x", pi, v, pi2))


def best_response(rho, l, pi) -> tuple[np.ndarray, float]:
    """Deterministic maximizer of ``q -> l(q, pi)`` (lowest index on ties) and its value."""
    v = _vals(l)
    util = np.einsum("xab,xb->xa", v, np.asarray(pi, dtype=np.float64))
    best = util.argmax(axis=1)
    q = np.zeros_like(util)
    q[np.arange(util.shape[0]), best] = 1.0
    return q, float(np.asarray(rho) @ util.max(axis=1))


def duality_gap(rho, l, pi) -> float:
    """``max_q l(q, pi) - min_q l(pi, q)``; zero exactly at a minimax winner."""
    v = _vals(l)
    pi = np.asarray(pi, dtype=np.float64)
    rho = np.asarray(rho)
    upper = rho @ np.einsum("xab,xb->xa", v, pi).max(axis=1)
    lower = rho @ np.einsum("xa,xab->xb", pi, v).min(axis=1)
    return float(max(upper - lower, 0.0))


def context_gaps(l, pi) -> np.ndarray:
    """Per-context duality gaps, shape ``(contexts,)``; batched over leading axes of ``pi``."""
    v = _vals(l)
    pi = np.asarray(pi, dtype=np.float64)
    upper = np.einsum("xab,...xb->...xa", v, pi).max(axis=-1)
    lower = np.einsum("...xa,xab->...xb", pi, v).min(axis=-1)
    return np.maximum(upper - lower, 0.0)


@dataclass(frozen=True)
class MinimaxResult:
    policy: np.ndarray
    gap: float
    iterations: int
    converged: bool


def minimax_winner_result(rho, l, tol: float = 1e-3, max_iters: int = 200_000,
                          check_every: int = 50) -> MinimaxResult:
    """Multiplicative-weights self-play with step ``sqrt(8 ln K / t)``, per context.

    The certified candidate is the better of the running average and the
    current iterate, measured by the exact duality gap.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v = _vals(l)
    rho = np.asarray(rho, dtype=np.float64)
    n_x, k = v.shape[:2]
    logw = np.zeros((n_x, k))
    pi = np.full((n_x, k), 1.0 / k)
    avg = np.zeros((n_x, k))
    best_pi, best_gap = pi.copy(), duality_gap(rho, v, pi)
    if best_gap <= tol:
        return MinimaxResult(best_pi, best_gap, 0, True)
    lnk = math.log(k) if k > 1 else 1.0
    t = 0
    for t in range(1, max_iters + 1):
        avg += (pi - avg) / t
        util = np.einsum("xab,xb->xa", v, pi)
        logw += math.sqrt(8.0 * lnk / t) * util
        logw -= logw.max(axis=1, keepdims=True)
        pi = np.exp(logw)
        pi /= pi.sum(axis=1, keepdims=True)
        if t % check_every == 0 or t == max_iters:
            for cand in (avg, pi):
                g = duality_gap(rho, v, cand)
                if g < best_gap:
                    best_pi, best_gap = cand.copy(), g
            if best_gap <= tol:
                return MinimaxResult(best_pi, best_gap, t, True)
    log.warning("minimax_winner: gap %.3e above tol %.1e after %d iterations", best_gap, tol, t)
    return MinimaxResult(best_pi, best_gap, t, False)


def minimax_winner(rho, l, tol: float = 1e-3, max_iters: int = 200_000) -> np.ndarray:
    return minimax_winner_result(rho, l, tol, max_iters).policy


def simplex_grid(k: int, mesh: int) -> np.ndarray:
    """All points of the ``k``-action simplex with coordinates in ``{0, 1/mesh, ..., 1}``."""
    if k < 1 or mesh < 1:
        raise ValueError("need k >= 1 and mesh >= 1")
    if k == 1:
        return np.ones((1, 1))
    # stars and bars: bar positions among mesh + k - 1 slots
    bars = np.array(list(itertools.combinations(range(mesh + k - 1), k - 1)), dtype=np.int64)
    padded = np.concatenate([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), mesh + k - 1)], axis=1)
    return (np.diff(padded, axis=1) - 1) / mesh


def restricted_suboptimality(rho, l, pi, pi_ref, C: float, mesh: int = 50) -> float:
    """Approximate ``max_q l(q, pi) - max_{q in Pi_C} l(q, pi)`` by grid search.

    ``Pi_C`` holds policies whose per-context chi-squared divergence
    ``(sum_a q(a)^2 / pi_ref(a) - 1) / 2`` is at most ``C``; mass off the
    reference support is excluded.  The restricted maximum is taken over the
    grid points of mesh ``1/mesh`` (plus ``pi_ref`` itself, which is always
    feasible), so the result over-estimates the exact quantity by at most the
    grid resolution.
    """
    v = _vals(l)
    pi = np.asarray(pi, dtype=np.float64)
    ref = np.asarray(pi_ref, dtype=np.float64)
    if not C >= 0:
        raise DomainError("C must be non-negative")
    util = np.einsum("xab,xb->xa", v, pi)
    grid = simplex_grid(v.shape[1], mesh)
    best = np.empty(v.shape[0])
    for x in range(v.shape[0]):
        sup = ref[x] > 0
        pts = np.vstack([grid[np.all(grid[:, ~sup] == 0, axis=1)], ref[x]])
        chi2 = 0.5 * ((pts[:, sup] ** 2 / ref[x, sup]).sum(axis=1) - 1.0)
        feas = pts[chi2 <= C + 1e-12]
        best[x] = (feas @ util[x]).max()
    return float(np.asarray(rho) @ (util.max(axis=1) - best))
