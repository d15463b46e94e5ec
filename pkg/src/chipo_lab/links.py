"""Link functions mapping density ratios to implicit rewards, and their inverses.

Three families are supported:

* ``KL``: ``phi(z) = log z`` (DPO).
* ``MixedChi2(gamma)``: ``phi(z) = z + gamma * log z`` (chi-squared plus
  ``gamma`` times KL; ``gamma = 1`` is the chi-PO link).
* ``AlphaMixed(alpha, gamma, clip_lo, clip_hi)``:
  ``phi(z) = exp(clip(alpha * log z, clip_lo, clip_hi)) + gamma * log z``,
  the numerically tamer variant used for training large models.

All functions are vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, SolverError

INV_E = math.exp(-1.0)
INVERSE_TOL = 1e-10

KL_KIND = "kl"
MIXED_KIND = "mixed_chi2"
ALPHA_KIND = "alpha_mixed"


@dataclass(frozen=True)
class LinkSpec:
    kind: str
    gamma: float = 1.0
    alpha: float = 1.0
    clip_lo: float = -88.0
    clip_hi: float = 20.0

    def __post_init__(self):
        if self.kind not in (KL_KIND, MIXED_KIND, ALPHA_KIND):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind != KL_KIND and not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.kind == ALPHA_KIND:
            if not 0 < self.alpha <= 1:
                raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
            if not self.clip_lo < self.clip_hi:
                raise ValueError("clip_lo must be smaller than clip_hi")

    @property
    def name(self) -> str:
        if self.kind == KL_KIND:
            return "kl"
        if self.kind == MIXED_KIND:
            return f"mixed_chi2(gamma={self.gamma:g})"
        return f"alpha_mixed(alpha={self.alpha:g},gamma={self.gamma:g})"

    def to_dict(self) -> dict:
        if self.kind == KL_KIND:
            return {"kind": KL_KIND}
        if self.kind == MIXED_KIND:
            return {"kind": MIXED_KIND, "gamma": self.gamma}
        return {"kind": ALPHA_KIND, "alpha": self.alpha, "gamma": self.gamma,
                "clip_lo": self.clip_lo, "clip_hi": self.clip_hi}

    @classmethod
    def from_dict(cls, d: dict) -> "LinkSpec":
        return cls(**d)


def KL() -> LinkSpec:
    return LinkSpec(KL_KIND)


def MixedChi2(gamma: float = 1.0) -> LinkSpec:
    return LinkSpec(MIXED_KIND, gamma=gamma)


def AlphaMixed(alpha: float = 1.0, gamma: float = 1.0, clip_lo: float = -88.0,
               clip_hi: float = 20.0) -> LinkSpec:
    return LinkSpec(ALPHA_KIND, gamma=gamma, alpha=alpha, clip_lo=clip_lo, clip_hi=clip_hi)


def _phi_log(spec: LinkSpec, u):
    """phi evaluated at ``z = exp(u)``."""
    if spec.kind == KL_KIND:
        return u
    if spec.kind == MIXED_KIND:
        return np.exp(u) + spec.gamma * u
    return np.exp(np.clip(spec.alpha * u, spec.clip_lo, spec.clip_hi)) + spec.gamma * u


def _dphi_log(spec: LinkSpec, u):
    """d phi / d log z at ``z = exp(u)``."""
    if spec.kind == KL_KIND:
        return np.ones_like(u)
    if spec.kind == MIXED_KIND:
        return np.exp(u) + spec.gamma
    au = spec.alpha * u
    inside = (au > spec.clip_lo) & (au < spec.clip_hi)
    return np.where(inside, spec.alpha * np.exp(np.clip(au, spec.clip_lo, spec.clip_hi)), 0.0) + spec.gamma


def link_value(spec: LinkSpec, z):
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise DomainError("link argument must be strictly positive")
    if spec.kind == KL_KIND:
        out = np.log(z)
    elif spec.kind == MIXED_KIND:
        out = z + spec.gamma * np.log(z)
    else:
        out = _phi_log(spec, np.log(z))
    return out[()] if out.ndim == 0 else out


def link_dlog(spec: LinkSpec, z):
    """Derivative of ``phi(z)`` with respect to ``log z``."""
    z = np.asarray(z, dtype=np.float64)
    return _dphi_log(spec, np.log(z))


def lambert_w0(y, *, max_iter: int = 50):
    """Principal branch of the Lambert W function for real ``y >= -1/e``.

    Halley iteration from ``log1p(y)`` (``y >= 0``) or the branch-point series
    (``y < 0``), stopped at relative residual ``1e-13``.
    """
    y = np.asarray(y, dtype=np.float64)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if np.any(np.isnan(y)) or np.any(y < -INV_E):
        raise DomainError("lambert_w0 is defined for y >= -1/e")
    w = np.empty_like(y)
    pos = y >= 0
    w[pos] = np.log1p(y[pos])
    neg = ~pos
    if np.any(neg):
        p = np.sqrt(np.maximum(2.0 * (math.e * y[neg] + 1.0), 0.0))
        w[neg] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    w[np.isinf(y)] = np.inf
    active = np.isfinite(y) & (y != 0) & (y > -INV_E)
    w[y == 0] = 0.0
    w[y == -INV_E] = -1.0
    for _ in range(max_iter):
        if not active.any():
            break
        wa, ya = w[active], y[active]
        # Halley step with f = w e^w - y scaled by e^{-w} to avoid overflow
        f = wa - ya * np.exp(-wa)
        wp1 = wa + 1.0
        denom = wp1 - (wa + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0, f / np.where(denom != 0, denom, 1.0), 0.0)
        wn = np.maximum(wa - step, -1.0)
        w[active] = wn
        res = np.abs(wn - ya * np.exp(-wn)) * np.exp(wn - np.log(np.maximum(1.0, np.abs(ya))))
        done = (res <= 1e-13) | (step == 0) | (np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(wn)))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return float(w[0]) if scalar else w


def _initial_log_inverse(spec: LinkSpec, y):
    if spec.kind == MIXED_KIND and spec.gamma == 1.0:
        u = np.array(y, dtype=np.float64, copy=True)
        mid = (y >= -30.0) & (y <= 700.0)
        u[mid] = np.log(lambert_w0(np.exp(y[mid])))
        big = y > 700.0
        if np.any(big):
            yb = y[big]
            ly = np.log(yb)
            u[big] = np.log(yb - ly + ly / yb)
        return u
    g = spec.gamma
    return np.where(y < 1.0, y / g, np.log(np.maximum(y, 1.0)))


def _solve_log_inverse(spec: LinkSpec, y, u0, tol: float, max_iter: int = 200):
    """Safeguarded Newton on the increasing map ``u -> phi(exp(u)) - y``."""
    u = u0.copy()
    step = np.ones_like(u)
    lo = u - step
    for _ in range(200):
        bad = _phi_log(spec, lo) - y > 0
        if not bad.any():
            break
        step[bad] *= 2.0
        lo[bad] = u[bad] - step[bad]
    else:
        raise SolverError("could not bracket inverse link from below")
    step = np.ones_like(u)
    hi = u + step
    for _ in range(200):
        bad = _phi_log(spec, hi) - y < 0
        if not bad.any():
            break
        step[bad] *= 2.0
        hi[bad] = u[bad] + step[bad]
    else:
        raise SolverError("could not bracket inverse link from above")

    active = np.ones(u.shape, dtype=bool)
    for _ in range(max_iter):
        g = _phi_log(spec, u) - y
        below = g < 0
        lo = np.where(below, u, lo)
        hi = np.where(below, hi, u)
        converged = np.abs(g) <= tol * np.maximum(1.0, np.abs(y)) * 1e-3
        active &= ~converged
        if not active.any():
            break
        d = _dphi_log(spec, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            un = u - g / d
        out = ~((un > lo) & (un < hi)) | ~np.isfinite(un)
        un = np.where(out, 0.5 * (lo + hi), un)
        stalled = (hi - lo) <= 4e-16 * np.maximum(1.0, np.abs(u))
        active &= ~stalled
        u = np.where(active, un, u)
    return u


def link_inverse_log(spec: LinkSpec, y):
    """``log phi^{-1}(y)``; finite even where ``phi^{-1}(y)`` underflows."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("link_inverse needs finite input")
    if spec.kind == KL_KIND:
        return y.copy()
    y1 = np.atleast_1d(y)
    u = _solve_log_inverse(spec, y1, _initial_log_inverse(spec, y1), INVERSE_TOL)
    return u.reshape(y.shape)


def link_inverse(spec: LinkSpec, y):
    """Positive ``z`` with ``link_value(spec, z) == y`` to ``1e-10`` absolute."""
    out = np.exp(link_inverse_log(spec, y))
    return out[()] if out.ndim == 0 else out
