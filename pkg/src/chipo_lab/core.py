"""Tabular contextual-bandit domain types and policy evaluation.

Policies and reward models are plain ``float64`` arrays of shape
``(n_contexts, n_actions)``; the helpers below validate them.  Datasets keep
their columns as integer arrays so every objective can be evaluated with
vectorized indexing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-12


class ShapeError(ValueError):
    """Array shapes do not agree with the instance they are used with."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class SolverError(RuntimeError):
    """A numerical routine failed to converge or to bracket a root."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_policy(probs, *, tol: float = ROW_TOL) -> np.ndarray:
    """Validate a context x action probability matrix and return a read-only copy."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeError(f"policy must be 2-D (contexts x actions), got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise DomainError("policy entries must be finite and non-negative")
    err = np.max(np.abs(p.sum(axis=1) - 1.0))
    if err > tol:
        raise DomainError(f"policy rows must sum to 1 (max deviation {err:.3e})")
    return _frozen(p)


def as_reward(values) -> np.ndarray:
    r = np.asarray(values, dtype=np.float64)
    if r.ndim != 2:
        raise ShapeError(f"reward must be 2-D (contexts x actions), got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DomainError("reward entries must be finite")
    return _frozen(r)


def point_mass(n_contexts: int, n_actions: int, action) -> np.ndarray:
    """Deterministic policy; ``action`` is an int or one index per context."""
    p = np.zeros((n_contexts, n_actions))
    p[np.arange(n_contexts), np.broadcast_to(np.asarray(action), (n_contexts,))] = 1.0
    return p


def uniform_policy(n_contexts: int, n_actions: int) -> np.ndarray:
    return np.full((n_contexts, n_actions), 1.0 / n_actions)


@dataclass(frozen=True, eq=False)
class Instance:
    """Finite contextual bandit.

    ``support_aware`` relaxes the strict positivity of ``pi_ref`` to
    non-negativity; every density-ratio computation is then restricted to the
    support ``pi_ref > 0``.  Only the lower-bound constructions need it.
    """

    rho: np.ndarray
    r_star: np.ndarray
    r_max: float
    pi_ref: np.ndarray
    support_aware: bool = False
    context_names: tuple = field(default=(), compare=False)
    action_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.float64)
        r = np.asarray(self.r_star, dtype=np.float64)
        ref = np.asarray(self.pi_ref, dtype=np.float64)
        if rho.ndim != 1 or r.ndim != 2 or ref.shape != r.shape or r.shape[0] != rho.size:
            raise ShapeError(
                f"inconsistent shapes: rho {rho.shape}, r_star {r.shape}, pi_ref {ref.shape}"
            )
        if np.any(rho <= 0) or abs(rho.sum() - 1.0) > ROW_TOL:
            raise DomainError("rho must be strictly positive and sum to 1")
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if np.any(r < 0) or np.any(r > self.r_max):
            raise DomainError("r_star must lie in [0, r_max]")
        as_policy(ref)
        if self.support_aware:
            if np.any(ref.sum(axis=1) <= 0):
                raise DomainError("every context needs a non-empty reference support")
        elif np.any(ref <= 0):
            raise DomainError("pi_ref must be strictly positive (pass support_aware=True to relax)")
        object.__setattr__(self, "rho", _frozen(rho))
        object.__setattr__(self, "r_star", _frozen(r))
        object.__setattr__(self, "pi_ref", _frozen(ref))
        object.__setattr__(self, "r_max", float(self.r_max))

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.r_max == other.r_max and self.support_aware == other.support_aware
                and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("rho", "r_star", "pi_ref")))

    __hash__ = None

    @property
    def n_contexts(self) -> int:
        return self.rho.size

    @property
    def n_actions(self) -> int:
        return self.r_star.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.r_star.shape

    @property
    def support(self) -> np.ndarray:
        return self.pi_ref > 0

    def check_shape(self, arr, what: str = "array") -> np.ndarray:
        a = np.asarray(arr, dtype=np.float64)
        if a.shape != self.shape:
            raise ShapeError(f"{what} has shape {a.shape}, instance expects {self.shape}")
        return a

    def with_reward(self, r_star) -> "Instance":
        return Instance(
            self.rho, r_star, self.r_max, self.pi_ref, self.support_aware,
            self.context_names, self.action_names,
        )


@dataclass(frozen=True)
class PreferenceDataset:
    """Tuples ``(x, a_plus, a_minus)`` stored column-wise."""

    x: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=np.int64).reshape(-1) for c in (self.x, self.plus, self.minus)]
        if not (cols[0].size == cols[1].size == cols[2].size):
            raise ShapeError("dataset columns must have equal length")
        if any(np.any(c < 0) for c in cols):
            raise DomainError("dataset indices must be non-negative")
        for name, c in zip(("x", "plus", "minus"), cols):
            object.__setattr__(self, name, _frozen(c, np.int64))

    def __len__(self) -> int:
        return self.x.size

    @classmethod
    def from_tuples(cls, tuples) -> "PreferenceDataset":
        t = np.asarray(list(tuples), dtype=np.int64).reshape(-1, 3)
        return cls(t[:, 0], t[:, 1], t[:, 2])

    def tuples(self) -> list[tuple[int, int, int]]:
        return [(int(a), int(b), int(c)) for a, b, c in zip(self.x, self.plus, self.minus)]

    def validate(self, instance: Instance) -> "PreferenceDataset":
        n_x, n_a = instance.shape
        if len(self) and (self.x.max() >= n_x or max(self.plus.max(), self.minus.max()) >= n_a):
            raise DomainError("dataset index out of range for instance")
        return self

    def unique_counts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Distinct tuples and their multiplicities (tabular data repeat a lot)."""
        cached = self.__dict__.get("_unique")
        if cached is not None:
            return cached
        if not len(self):
            e = _frozen(np.zeros(0, dtype=np.int64), np.int64)
            out = (e, e, e, e)
        else:
            t = np.stack([self.x, self.plus, self.minus], axis=1)
            u, counts = np.unique(t, axis=0, return_counts=True)
            out = tuple(_frozen(c, np.int64) for c in (u[:, 0], u[:, 1], u[:, 2], counts))
        object.__setattr__(self, "_unique", out)
        return out

    def actions(self) -> set[int]:
        return set(np.concatenate([self.plus, self.minus]).tolist())


@dataclass(frozen=True)
class ContextDataset:
    contexts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.contexts, dtype=np.int64).reshape(-1)
        if np.any(c < 0):
            raise DomainError("context indices must be non-negative")
        object.__setattr__(self, "contexts", _frozen(c, np.int64))

    def __len__(self) -> int:
        return self.contexts.size

    def weights(self, n_contexts: int) -> np.ndarray:
        """Empirical context frequencies."""
        if self.contexts.size and self.contexts.max() >= n_contexts:
            raise DomainError("context index out of range")
        w = np.bincount(self.contexts, minlength=n_contexts).astype(np.float64)
        return w / max(w.sum(), 1.0)


def expected_return(instance: Instance, policy, reward=None) -> float:
    """``sum_x rho(x) sum_a pi(a|x) r(x,a)``; ``reward`` defaults to ``r_star``."""
    p = instance.check_shape(policy, "policy")
    r = instance.r_star if reward is None else instance.check_shape(reward, "reward")
    return float(instance.rho @ np.einsum("xa,xa->x", p, r))


def regret(instance: Instance, comparator, candidate) -> float:
    """``J(comparator) - J(candidate)`` under ``r_star``; may be negative."""
    return expected_return(instance, comparator) - expected_return(instance, candidate)


def greedy_policy(instance: Instance, reward=None) -> np.ndarray:
    """Point mass on the best supported action in each context (lowest index on ties)."""
    r = instance.r_star if reward is None else instance.check_shape(reward, "reward")
    masked = np.where(instance.support, r, -np.inf)
    return point_mass(*instance.shape, masked.argmax(axis=1))
