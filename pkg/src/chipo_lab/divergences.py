"""Coverage coefficients and divergences of a policy from the reference policy.

All quantities are exact tabular sums weighted by the context distribution.
Ratios are only formed on the reference support; a policy that puts mass
outside it has infinite coverage.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Instance, as_policy


@dataclass(frozen=True)
class CoverageReport:
    c_one: float
    chi2: float
    kl: float
    c_inf: float
    c_smoothed: float
    eta: float

    def as_dict(self) -> dict:
        return asdict(self)


def _ratio(instance: Instance, policy: np.ndarray) -> np.ndarray:
    ref = instance.pi_ref
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ref > 0, policy / np.where(ref > 0, ref, 1.0), np.where(policy > 0, np.inf, 0.0))
    return ratio


def coverage(instance: Instance, policy, eta: float = 0.0) -> CoverageReport:
    if eta < 0:
        raise ValueError("eta must be non-negative")
    p = as_policy(instance.check_shape(policy, "policy"))
    ref = instance.pi_ref
    rho = instance.rho
    ratio = _ratio(instance, p)
    mass = p > 0

    c_one = float(rho @ np.where(mass, p * ratio, 0.0).sum(axis=1))
    # 0 log(0/q) = 0
    with np.errstate(divide="ignore"):
        kl_terms = np.where(mass, p * np.log(np.where(mass, ratio, 1.0)), 0.0)
    kl = float(rho @ kl_terms.sum(axis=1))
    c_inf = float(np.max(np.where(mass, ratio, 0.0)))
    denom = ref + eta * p
    with np.errstate(divide="ignore", invalid="ignore"):
        sm = np.where(mass, p * p / np.where(denom > 0, denom, 1.0), 0.0)
    sm = np.where(mass & (denom == 0), np.inf, sm)
    c_smoothed = float(rho @ sm.sum(axis=1))
    return CoverageReport(
        c_one=c_one,
        chi2=(c_one - 1.0) / 2.0,
        kl=kl,
        c_inf=c_inf,
        c_smoothed=c_smoothed,
        eta=float(eta),
    )


def mixed_chi2_divergence(instance: Instance, policy, gamma: float = 1.0) -> float:
    """``E_rho[ 1/2 E_ref[(ratio - 1)^2] + gamma * KL ]`` per context, averaged over rho."""
    rep = coverage(instance, policy)
    return rep.chi2 + gamma * rep.kl
