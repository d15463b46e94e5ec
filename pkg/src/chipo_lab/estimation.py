"""Bradley-Terry simulation and preference-fitting objectives."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .core import DomainError, Instance, PreferenceDataset, SolverError, as_policy
from .links import KL_KIND, LinkSpec, MixedChi2, _dphi_log, _phi_log, link_value

log = logging.getLogger(__name__)

TIE_TOL = 1e-12

DiffFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class FitError(SolverError):
    """Gradient fitting produced a non-finite loss."""


@dataclass(frozen=True)
class ObjectiveConfig:
    """Hyperparameters of the DPO-family objectives.

    ``clip_radius=None`` means "use ``2 * r_max``" (the chi-PO default); pass
    ``math.inf`` to disable clipping.
    """

    link: LinkSpec = field(default_factory=MixedChi2)
    beta: float = 1.0
    r_max: float = 1.0
    clip_radius: float | None = None
    sft_weight_alpha: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.sft_weight_alpha < 0:
            raise ValueError("sft_weight_alpha must be non-negative")
        if self.clip_radius is None:
            object.__setattr__(self, "clip_radius", 2.0 * self.r_max)
        if not self.clip_radius > 0:
            raise ValueError("clip_radius must be positive")

    @classmethod
    def chipo(cls, beta: float, r_max: float = 1.0) -> "ObjectiveConfig":
        return cls(MixedChi2(1.0), beta, r_max)

    @classmethod
    def dpo(cls, beta: float, r_max: float = 1.0) -> "ObjectiveConfig":
        return cls(LinkSpec(KL_KIND), beta, r_max, clip_radius=math.inf)

    @classmethod
    def dpo_sft(cls, beta: float, alpha: float, r_max: float = 1.0) -> "ObjectiveConfig":
        return cls(LinkSpec(KL_KIND), beta, r_max, clip_radius=math.inf, sft_weight_alpha=alpha)


def bt_prob(reward, x, a, b):
    """Bradley-Terry probability that ``a`` beats ``b`` in context ``x``."""
    r = np.asarray(reward, dtype=np.float64)
    out = expit(r[x, a] - r[x, b])
    return out[()] if np.ndim(out) == 0 else out


def _sample_actions(rng: np.random.Generator, pi_ref: np.ndarray, x: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(pi_ref, axis=1)
    cdf /= cdf[:, -1:]
    last = pi_ref.shape[1] - 1 - np.argmax(pi_ref[:, ::-1] > 0, axis=1)
    u = rng.random(x.size)
    idx = (cdf[x] <= u[:, None]).sum(axis=1)
    return np.minimum(idx, last[x])


def sample_preferences(instance: Instance, n: int, seed) -> PreferenceDataset:
    """``n`` i.i.d. tuples: ``x ~ rho``, ``a, b ~ pi_ref(.|x)``, ordered by a Bradley-Terry draw under ``r_star``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    x = rng.choice(instance.n_contexts, size=n, p=instance.rho)
    a = _sample_actions(rng, instance.pi_ref, x)
    b = _sample_actions(rng, instance.pi_ref, x)
    a_wins = rng.random(n) < expit(instance.r_star[x, a] - instance.r_star[x, b])
    return PreferenceDataset(x, np.where(a_wins, a, b), np.where(a_wins, b, a))


def sample_general_preferences(instance: Instance, pref_values, n: int, seed) -> PreferenceDataset:
    """Like :func:`sample_preferences` but labels with ``P(a > b) = (1 + l(x,a,b)) / 2``."""
    rng = np.random.default_rng(seed)
    x = rng.choice(instance.n_contexts, size=n, p=instance.rho)
    a = _sample_actions(rng, instance.pi_ref, x)
    b = _sample_actions(rng, instance.pi_ref, x)
    l = np.asarray(pref_values)
    a_wins = rng.random(n) < 0.5 * (1.0 + l[x, a, b])
    return PreferenceDataset(x, np.where(a_wins, a, b), np.where(a_wins, b, a))


def sample_contexts(instance: Instance, m: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(instance.n_contexts, size=m, p=instance.rho)


def reward_diffs(reward) -> DiffFn:
    r = np.asarray(reward, dtype=np.float64)
    return lambda x, a, b: r[x, a] - r[x, b]


def _clip(d, radius):
    return d if math.isinf(radius) else np.clip(d, -radius, radius)


def preference_nll(diffs: DiffFn, dataset: PreferenceDataset, clip_radius: float = math.inf) -> float:
    """``-sum log sigmoid(clip(diff(x, a+, a-)))`` over the dataset (a sum, not a mean)."""
    if not len(dataset):
        raise ValueError("preference_nll needs a non-empty dataset")
    x, p, m, counts = dataset.unique_counts()
    d = _clip(np.asarray(diffs(x, p, m), dtype=np.float64), clip_radius)
    return float(counts @ np.logaddexp(0.0, -d))


def mean_preference_nll(diffs: DiffFn, dataset: PreferenceDataset, clip_radius: float = math.inf) -> float:
    return preference_nll(diffs, dataset, clip_radius) / len(dataset)


def adversarial_tie_break(instance: Instance, beta: float, link: LinkSpec) -> Callable:
    """Score for :func:`mle_finite`: the true value of the policy a reward model induces.

    The tied model with the *lowest* score wins, i.e. the one whose induced
    regularized policy is worst under ``r_star``.
    """
    from .solvers import solve_regularized

    def score(reward) -> float:
        pol = solve_regularized(instance, reward, beta, link).policy
        return float(instance.rho @ (pol * instance.r_star).sum(axis=1))

    return score


def _pick(scores: np.ndarray, tie_break, candidates: Sequence) -> int:
    best = scores.min()
    tied = np.flatnonzero(scores <= best + TIE_TOL)
    if tie_break == "first" or len(tied) == 1:
        return int(tied[0])
    if tie_break == "last":
        return int(tied[-1])
    if callable(tie_break):
        vals = [tie_break(candidates[i]) for i in tied]
        return int(tied[int(np.argmin(vals))])
    raise ValueError(f"unknown tie_break {tie_break!r}")


def mle_finite_index(dataset: PreferenceDataset, reward_class: Sequence, clip_radius: float = math.inf,
                     tie_break="first") -> int:
    if not reward_class:
        raise ValueError("reward class is empty")
    if not len(dataset):
        scores = np.zeros(len(reward_class))
    else:
        x, p, m, counts = dataset.unique_counts()
        scores = np.empty(len(reward_class))
        for i, r in enumerate(reward_class):
            r = np.asarray(r, dtype=np.float64)
            scores[i] = counts @ np.logaddexp(0.0, -_clip(r[x, p] - r[x, m], clip_radius))
    return _pick(scores, tie_break, reward_class)


def mle_finite(dataset: PreferenceDataset, reward_class: Sequence, clip_radius: float = math.inf,
               tie_break="first") -> np.ndarray:
    """Maximum-likelihood reward model over a finite class.

    ``tie_break`` is ``"first"``, ``"last"``, or a callable scoring a reward
    model; among models whose NLL is within ``1e-12`` of the best, the one
    with the smallest score is returned (see :func:`adversarial_tie_break`).
    """
    return np.asarray(reward_class[mle_finite_index(dataset, reward_class, clip_radius, tie_break)])


def _log_ratio(policy, pi_ref):
    sup = pi_ref > 0
    if np.any(policy[sup] <= 0):
        raise DomainError("implicit rewards need strictly positive policy mass on the reference support")
    with np.errstate(divide="ignore"):
        return np.where(sup, np.log(np.where(sup, policy, 1.0)) - np.log(np.where(sup, pi_ref, 1.0)), np.nan)


def implicit_reward(policy, pi_ref, config: ObjectiveConfig) -> np.ndarray:
    """``beta * phi(pi / pi_ref)``; NaN off the reference support."""
    lr = _log_ratio(np.asarray(policy, dtype=np.float64), np.asarray(pi_ref, dtype=np.float64))
    sup = ~np.isnan(lr)
    out = np.full(lr.shape, np.nan)
    out[sup] = config.beta * link_value(config.link, np.exp(lr[sup]))
    return out


def implicit_diff(policy, pi_ref, config: ObjectiveConfig) -> DiffFn:
    """Clipped implicit reward difference ``clip(beta phi(pi(a)/ref(a)) - beta phi(pi(b)/ref(b)))``."""
    imp = implicit_reward(policy, pi_ref, config)
    radius = config.clip_radius

    def diff(x, a, b):
        return _clip(imp[x, a] - imp[x, b], radius)

    return diff


def _loss_parts(logp, dataset, instance, config):
    """Loss and its gradient with respect to ``log pi`` (a context x action matrix)."""
    ref = instance.pi_ref
    sup = ref > 0
    x, ap, am, counts = dataset.unique_counts()
    n = len(dataset)
    u = np.where(sup, logp - np.log(np.where(sup, ref, 1.0)), 0.0)
    imp = config.beta * np.where(sup, _phi_log(config.link, u), 0.0)
    raw = imp[x, ap] - imp[x, am]
    d = _clip(raw, config.clip_radius)
    loss = float(counts @ np.logaddexp(0.0, -d)) / n
    # d loss / d d = -sigmoid(-d); hard clip has zero gradient outside the band
    w = -counts * expit(-d) / n
    if not math.isinf(config.clip_radius):
        w = np.where(np.abs(raw) > config.clip_radius, 0.0, w)
    dphi = config.beta * np.where(sup, _dphi_log(config.link, u), 0.0)
    g = np.zeros_like(logp)
    np.add.at(g, (x, ap), w * dphi[x, ap])
    np.add.at(g, (x, am), -w * dphi[x, am])

    alpha = config.sft_weight_alpha
    if alpha > 0:
        ctx_w = np.bincount(dataset.x, minlength=ref.shape[0]) / n
        sft = (ref * np.where(sup, logp, 0.0)).sum(axis=1)
        loss -= alpha * config.beta * float(ctx_w @ sft)
        g -= alpha * config.beta * ctx_w[:, None] * ref
    return loss, g


def alignment_loss(policy, dataset: PreferenceDataset, instance: Instance, config: ObjectiveConfig) -> float:
    """Mean negative log-likelihood of the implicit rewards minus the optional SFT term.

    ``alpha = 0`` with the chi-PO link gives the chi-PO objective, with the KL
    link plain DPO; ``alpha > 0`` with KL is DPO+SFT.  The SFT expectation is
    taken over the contexts present in the dataset.
    """
    if not len(dataset):
        raise ValueError("alignment_loss needs a non-empty dataset")
    p = instance.check_shape(policy, "policy")
    _log_ratio(p, instance.pi_ref)  # raises on zero mass
    with np.errstate(divide="ignore"):
        logp = np.where(instance.support, np.log(np.where(instance.support, p, 1.0)), 0.0)
    return _loss_parts(logp, dataset, instance, config)[0]


def masked_softmax(logits, support) -> np.ndarray:
    z = np.where(support, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(support, np.exp(z), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad_logits(logits, dataset: PreferenceDataset, instance: Instance, config: ObjectiveConfig):
    """``alignment_loss`` of ``softmax(logits)`` and its gradient in the logits."""
    sup = instance.support
    pi = masked_softmax(logits, sup)
    z = np.where(sup, logits, -np.inf)
    mx = z.max(axis=1, keepdims=True)
    logp = np.where(sup, logits - mx - np.log(np.where(sup, np.exp(z - mx), 0.0).sum(axis=1, keepdims=True)), 0.0)
    loss, g_logp = _loss_parts(logp, dataset, instance, config)
    g_logp = np.where(sup, g_logp, 0.0)
    grad = g_logp - pi * g_logp.sum(axis=1, keepdims=True)
    return loss, np.where(sup, grad, 0.0), pi


@dataclass(frozen=True)
class FitOptions:
    lr: float = 0.5
    steps: int = 2000
    init_logits: np.ndarray | None = None
    grad_clip: float | None = None


@dataclass(frozen=True)
class FitTrace:
    policy: np.ndarray
    logits: np.ndarray
    losses: np.ndarray
    best_step: int


def fit_logit_policy_trace(instance: Instance, dataset: PreferenceDataset, config: ObjectiveConfig,
                           opt: FitOptions = FitOptions()) -> FitTrace:
    if opt.steps < 1:
        raise ValueError("steps must be at least 1")
    if not len(dataset):
        raise ValueError("cannot fit on an empty dataset")
    sup = instance.support
    if opt.init_logits is None:
        theta = np.where(sup, np.log(np.where(sup, instance.pi_ref, 1.0)), 0.0)
    else:
        theta = np.array(opt.init_logits, dtype=np.float64, copy=True)
    losses = np.empty(opt.steps + 1)
    best = (math.inf, theta.copy(), 0)
    for t in range(opt.steps + 1):
        loss, grad, _ = loss_and_grad_logits(theta, dataset, instance, config)
        if not math.isfinite(loss):
            raise FitError(f"non-finite loss at step {t}: loss={loss}, max|logit|={np.abs(theta).max():.3e}")
        losses[t] = loss
        if loss < best[0]:
            best = (loss, theta.copy(), t)
        if t == opt.steps:
            break
        if opt.grad_clip is not None:
            norm = np.linalg.norm(grad)
            if norm > opt.grad_clip:
                grad = grad * (opt.grad_clip / norm)
        theta = theta - opt.lr * grad
    policy = masked_softmax(best[1], sup)
    return FitTrace(as_policy(policy), best[1], losses, best[2])


def fit_logit_policy(instance: Instance, dataset: PreferenceDataset, config: ObjectiveConfig,
                     opt: FitOptions = FitOptions()) -> np.ndarray:
    """Full-batch gradient descent on :func:`alignment_loss` over row-softmax logits.

    Returns the lowest-loss iterate.  Deterministic given ``opt.init_logits``.
    """
    return fit_logit_policy_trace(instance, dataset, config, opt).policy


def ls_pref_fit_index(dataset: PreferenceDataset, pref_class: Sequence) -> int:
    if not pref_class:
        raise ValueError("preference class is empty")
    vals = [np.asarray(getattr(l, "values", l)) for l in pref_class]
    if not len(dataset):
        return 0
    x, p, m, counts = dataset.unique_counts()
    losses = np.array([counts @ (v[x, p, m] - 1.0) ** 2 for v in vals])
    return _pick(losses, "first", pref_class)


def ls_pref_fit(dataset: PreferenceDataset, pref_class: Sequence):
    """Least-squares fit ``argmin sum (l(x, a+, a-) - 1)^2`` over a finite class (first index on ties)."""
    return pref_class[ls_pref_fit_index(dataset, pref_class)]
