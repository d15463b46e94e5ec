"""Canonical hard instances and random instance generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, Instance, PreferenceDataset
from .games import PreferenceFunction


@dataclass(frozen=True)
class NamedInstance:
    instance: Instance
    reward_class: tuple = ()
    pref: PreferenceFunction | None = None
    pref_class: tuple = ()
    comparator: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    forbidden_actions: tuple = ()


def _illustrative_ref(n: int) -> np.ndarray:
    return np.array([0.5, 1.0 / (2 * n), 1.0 / (2 * n), (n - 2) / (2 * n)])


def _three_armed_rewards(i: int, base: float = 0.5) -> np.ndarray:
    r = np.zeros(4)
    r[0] = base
    r[i] = 1.0
    return r


def illustrative(n: int) -> NamedInstance:
    """Single context, actions ``a0..a3``; ``pi_ref = (1/2, 1/2n, 1/2n, (n-2)/2n)``.

    Reward class ``{r1, r2}`` with ``r_i(a0) = 1/2``, ``r_i(a_i) = 1`` and zero
    elsewhere; the truth is ``r1``.  ``n = 2`` gives ``pi_ref(a3) = 0`` and a
    support-aware instance.
    """
    if n < 2:
        raise DomainError("illustrative instance needs n >= 2")
    ref = _illustrative_ref(n)[None, :]
    r1 = _three_armed_rewards(1)[None, :]
    r2 = _three_armed_rewards(2)[None, :]
    inst = Instance(np.ones(1), r1, 1.0, ref, support_aware=bool(np.any(ref == 0)),
                    context_names=("x",), action_names=("a0", "a1", "a2", "a3"))
    comp = np.zeros((1, 4))
    comp[0, 0] = 1.0
    return NamedInstance(inst, (r1, r2), comparator=comp, forbidden_actions=(1, 2),
                         metadata={"name": "illustrative", "n": n})


def default_zeta(n: int) -> float:
    return math.log(2.0) / (2.0 * math.log(n))


def rpo_lower(n: int, zeta: float | None = None) -> NamedInstance:
    """Two-context DPO+SFT lower-bound instance.

    Context ``x1`` pays ``zeta`` for ``a0`` and nothing else under both
    rewards; context ``x2`` is the illustrative instance.  Comparator plays
    ``a0`` everywhere.
    """
    if n < 2:
        raise DomainError("rpo_lower instance needs n >= 2")
    zeta = default_zeta(n) if zeta is None else float(zeta)
    if not 0.0 <= zeta <= 1.0:
        raise DomainError(f"zeta must lie in [0, 1], got {zeta}")
    ref = np.tile(_illustrative_ref(n), (2, 1))
    x1 = np.array([zeta, 0.0, 0.0, 0.0])
    r1 = np.stack([x1, _three_armed_rewards(1)])
    r2 = np.stack([x1, _three_armed_rewards(2)])
    inst = Instance(np.full(2, 0.5), r1, 1.0, ref, support_aware=bool(np.any(ref == 0)),
                    context_names=("x1", "x2"), action_names=("a0", "a1", "a2", "a3"))
    comp = np.zeros((2, 4))
    comp[:, 0] = 1.0
    return NamedInstance(inst, (r1, r2), comparator=comp, forbidden_actions=(1, 2),
                         metadata={"name": "rpo_lower", "n": n, "zeta": zeta})


def general_lower_prefs() -> tuple[np.ndarray, np.ndarray]:
    """The two preference tables over actions ``(a, b, c, d)``."""
    a, b, c, d = range(4)
    l1 = np.zeros((4, 4))
    l2 = np.zeros((4, 4))
    l1[a, d], l1[b, d], l1[c, d] = 0.0, -1.0, 1.0
    l2[a, d], l2[b, d], l2[c, d] = -1.0, 0.0, -1.0
    return l1 - l1.T, l2 - l2.T


def general_lower(C: float = 2.0) -> tuple[NamedInstance, NamedInstance]:
    """Impossibility pair: one context, ``pi_ref = (1/C, 1/C, 1 - 2/C, 0)``.

    The two instances differ only in the preference function; both vanish on
    the reference support, so the data distributions coincide.
    """
    if C < 2:
        raise DomainError("general_lower needs C >= 2")
    ref = np.array([[1.0 / C, 1.0 / C, 1.0 - 2.0 / C, 0.0]])
    l1, l2 = general_lower_prefs()
    prefs = (PreferenceFunction(l1[None]), PreferenceFunction(l2[None]))
    out = []
    for i, (pref, mw) in enumerate(zip(prefs, (0, 1)), start=1):
        inst = Instance(np.ones(1), np.zeros((1, 4)), 1.0, ref, support_aware=True,
                        context_names=("x",), action_names=("a", "b", "c", "d"))
        comp = np.zeros((1, 4))
        comp[0, mw] = 1.0
        out.append(NamedInstance(inst, pref=pref, pref_class=prefs, comparator=comp,
                                 metadata={"name": f"general_lower_{i}", "C": C}))
    return out[0], out[1]


def bad_event_holds(dataset: PreferenceDataset, forbidden_actions) -> bool:
    """True iff no tuple uses a forbidden action as either response."""
    forb = np.asarray(list(forbidden_actions), dtype=np.int64)
    if not len(dataset) or not forb.size:
        return True
    return not (np.isin(dataset.plus, forb).any() or np.isin(dataset.minus, forb).any())


def random_instance(seed, n_contexts: int, n_actions: int, r_max: float = 1.0) -> NamedInstance:
    """Dirichlet(1) context distribution and reference rows, uniform rewards on ``[0, r_max]``."""
    if n_contexts < 1 or n_actions < 1:
        raise DomainError("need at least one context and one action")
    rng = np.random.default_rng(seed)
    rho = rng.dirichlet(np.ones(n_contexts))
    ref = rng.dirichlet(np.ones(n_actions), size=n_contexts)
    r = rng.uniform(0.0, r_max, size=(n_contexts, n_actions))
    rho = np.maximum(rho, 1e-300)
    rho /= rho.sum()
    ref = np.maximum(ref, 1e-300)
    ref /= ref.sum(axis=1, keepdims=True)
    inst = Instance(rho, r, r_max, ref)
    return NamedInstance(inst, (r,), pref=PreferenceFunction.from_reward(r),
                         metadata={"name": "random", "seed": seed})


def covered_pref_game(seed: int = 3) -> NamedInstance:
    """Two contexts, three actions, strictly positive reference and a random skew-symmetric truth.

    The preference class is ``{l*, -l*, 0}``.
    """
    rng = np.random.default_rng(seed)
    ref = np.array([[0.3, 0.3, 0.4], [0.5, 0.25, 0.25]])
    inst = Instance(np.array([0.5, 0.5]), np.zeros((2, 3)), 1.0, ref,
                    context_names=("x1", "x2"), action_names=("a", "b", "c"))
    upper = np.triu(rng.uniform(-1.0, 1.0, (2, 3, 3)), 1)
    truth = PreferenceFunction(upper - upper.transpose(0, 2, 1))
    pref_class = (truth, PreferenceFunction(-truth.values), PreferenceFunction.zero(2, 3))
    return NamedInstance(inst, pref=truth, pref_class=pref_class,
                         metadata={"name": "covered_pref_game", "seed": seed})


def preference_data_kl(first: NamedInstance, second: NamedInstance) -> float:
    """KL divergence between the labeled-pair distributions ``(x, a, b, y)`` of two instances.

    Pairs outside the reference support carry no mass and contribute nothing.
    """
    if first.pref is None or second.pref is None:
        raise DomainError("both instances need a preference function")
    i1, i2 = first.instance, second.instance
    if not (np.array_equal(i1.rho, i2.rho) and np.array_equal(i1.pi_ref, i2.pi_ref)):
        raise DomainError("KL is only implemented for instances sharing rho and pi_ref")
    w = i1.rho[:, None, None] * i1.pi_ref[:, :, None] * i1.pi_ref[:, None, :]
    p = 0.5 * (1.0 + first.pref.values)
    q = 0.5 * (1.0 + second.pref.values)
    total = 0.0
    for pp, qq in ((p, q), (1.0 - p, 1.0 - q)):
        live = (w > 0) & (pp > 0)
        if np.any(live & (qq <= 0)):
            return math.inf
        total += float(np.sum(w[live] * pp[live] * (np.log(pp[live]) - np.log(qq[live]))))
    return total
