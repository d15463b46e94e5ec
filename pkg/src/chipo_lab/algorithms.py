"""End-to-end drivers: chi-PO, DPO, DPO+SFT, chi-squared RLHF and Iterative chi-PO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import ContextDataset, Instance, PreferenceDataset, as_policy
from .estimation import (
    FitOptions,
    ObjectiveConfig,
    _pick,
    _sample_actions,
    adversarial_tie_break,
    alignment_loss,
    fit_logit_policy,
    ls_pref_fit_index,
    masked_softmax,
    mle_finite,
)
from .games import PreferenceFunction
from .links import LinkSpec, MixedChi2, _dphi_log, _phi_log
from .solvers import mirror_step, smoothed_chi2_rows, solve_regularized


@dataclass(frozen=True)
class TabularLogit:
    """Unrestricted softmax policies fitted by gradient descent."""

    options: FitOptions = field(default_factory=FitOptions)


@dataclass(frozen=True)
class RewardInduced:
    """Policies ``pi_ref * phi^{-1}((r - Z_r) / beta)`` for ``r`` in a finite reward class.

    ``tie_break`` is ``"first"``, ``"last"``, ``"adversarial"`` (worst true
    value among tied models) or a callable score.
    """

    reward_class: tuple
    link: LinkSpec
    beta: float
    tie_break: Union[str, Callable] = "first"

    def __post_init__(self):
        if not self.reward_class:
            raise ValueError("reward class is empty")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


PolicyClassSpec = Union[TabularLogit, RewardInduced]


def _resolve_tie_break(tie_break, instance: Instance, beta: float, link: LinkSpec):
    if tie_break == "adversarial":
        return adversarial_tie_break(instance, beta, link)
    return tie_break


def induced_policy(instance: Instance, reward, beta: float, link: LinkSpec) -> np.ndarray:
    return solve_regularized(instance, reward, beta, link).policy


def run_offline_alignment(instance: Instance, dataset: PreferenceDataset, class_spec: PolicyClassSpec,
                          config: ObjectiveConfig) -> np.ndarray:
    """Maximize the preference objective of ``config`` over the given policy class.

    For a reward-induced class with no SFT term the objective reduces to
    maximum likelihood over the reward class followed by an exact regularized
    solve.  With an SFT term every induced policy is scored directly.
    """
    if isinstance(class_spec, TabularLogit):
        return fit_logit_policy(instance, dataset, config, class_spec.options)
    if not isinstance(class_spec, RewardInduced):
        raise TypeError(f"unknown policy class {class_spec!r}")
    if not math.isclose(class_spec.beta, config.beta, rel_tol=0, abs_tol=0) or class_spec.link != config.link:
        raise ValueError("reward-induced class and objective must share beta and link")
    tie = _resolve_tie_break(class_spec.tie_break, instance, config.beta, config.link)
    if config.sft_weight_alpha == 0:
        r_hat = mle_finite(dataset, class_spec.reward_class, config.clip_radius, tie)
        return induced_policy(instance, r_hat, config.beta, config.link)

    policies = [induced_policy(instance, r, config.beta, config.link) for r in class_spec.reward_class]
    losses = np.array([alignment_loss(p, dataset, instance, config) for p in policies])
    idx = _pick(losses, tie, class_spec.reward_class)
    return policies[idx]


def run_chi2_rlhf(instance: Instance, dpref: PreferenceDataset, dx: ContextDataset, reward_class: Sequence,
                  beta: float, eta: float, tie_break="first") -> np.ndarray:
    """Reward MLE (unclipped) followed by exact smoothed chi-squared policy optimization.

    Contexts absent from ``dx`` keep the reference policy.  The empirical
    objective separates over contexts, so positive context weights do not
    change the per-context maximizer.
    """
    if not len(dx):
        raise ValueError("unlabeled context dataset is empty")
    tie = _resolve_tie_break(tie_break, instance, beta, MixedChi2(1.0))
    r_hat = mle_finite(dpref, reward_class, math.inf, tie)
    seen = dx.weights(instance.n_contexts) > 0
    out = np.array(instance.pi_ref, copy=True)
    if seen.any():
        res = smoothed_chi2_rows(instance.pi_ref[seen], r_hat[seen], beta, eta)
        out[seen] = res.policy
    return as_policy(out)


@dataclass(frozen=True)
class IterativeChiPOConfig:
    beta: float
    eta: float
    T: int
    m: int
    clip: float = 4.0
    exact: bool = True
    regression: FitOptions = field(default_factory=lambda: FitOptions(lr=0.05, steps=500))

    def __post_init__(self):
        if not (self.beta > 0 and self.eta > 0):
            raise ValueError("beta and eta must be positive")
        if self.T < 1 or self.m < 1:
            raise ValueError("T and m must be at least 1")
        if self.clip != 4.0:
            raise ValueError("Iterative chi-PO clips its predictor at 4")

    @classmethod
    def theory(cls, n: int, m: int, v_max: float = 2.0, **kw) -> "IterativeChiPOConfig":
        """``T = mn / (n v_max^2 + m)``, ``beta = T^{-1/2}``, ``eta = 1/T``."""
        T = max(1, int(round(m * n / (n * v_max ** 2 + m))))
        return cls(beta=1.0 / math.sqrt(T), eta=1.0 / T, T=T, m=m, **kw)


@dataclass(frozen=True)
class IterativeResult:
    policy: np.ndarray
    iterates: tuple
    pref_index: int


def _regression_step(instance: Instance, triples, pi_t, r_hat, cfg: IterativeChiPOConfig,
                     link: LinkSpec) -> np.ndarray:
    """Least-squares fit of the clipped predictor to ``r_hat(x,a) - r_hat(x,b)`` over logits."""
    sup = instance.support
    ref = instance.pi_ref
    log_ref = np.log(np.where(sup, ref, 1.0))
    x, a, b = triples
    m = x.size
    target = r_hat[x, a] - r_hat[x, b]
    u_t = np.where(sup, np.log(np.where(sup, pi_t, 1.0)) - log_ref, 0.0)
    g_t = -(cfg.beta / cfg.eta) * np.where(sup, _phi_log(link, u_t), 0.0)
    scale = cfg.beta * (1.0 + 1.0 / cfg.eta)
    theta = np.where(sup, np.log(np.where(sup, pi_t, 1.0)), 0.0)
    best = (math.inf, theta)
    opt = cfg.regression
    for step in range(opt.steps + 1):
        pi = masked_softmax(theta, sup)
        u = np.where(sup, np.log(np.where(sup, pi, 1.0)) - log_ref, 0.0)
        G = scale * np.where(sup, _phi_log(link, u), 0.0) + g_t
        f = G[x, a] - G[x, b]
        fc = np.clip(f, -cfg.clip, cfg.clip)
        e = fc - target
        loss = float(e @ e) / m
        if loss < best[0]:
            best = (loss, theta.copy())
        if step == opt.steps:
            break
        w = np.where(np.abs(f) < cfg.clip, 2.0 * e / m, 0.0)
        dG = scale * np.where(sup, _dphi_log(link, u), 0.0)
        g = np.zeros_like(theta)
        np.add.at(g, (x, a), w * dG[x, a])
        np.add.at(g, (x, b), -w * dG[x, b])
        grad = g - pi * g.sum(axis=1, keepdims=True)
        theta = theta - opt.lr * np.where(sup, grad, 0.0)
    return masked_softmax(best[1], sup)


def run_iterative_chipo_trace(instance: Instance, dpref: PreferenceDataset, pref_class: Sequence,
                              config: IterativeChiPOConfig, seed) -> IterativeResult:
    """Iterative chi-PO self-play for general preferences.

    Each iteration draws one opponent action ``b_t ~ pi^t(x)`` per context,
    sets ``r_hat(x, a) = l_hat(x, a, b_t)`` and takes an exact mixed
    chi-squared mirror step (or, with ``exact=False``, fits the clipped
    regression over logits on ``m`` unlabeled reference triples).
    """
    link = MixedChi2(1.0)
    idx = ls_pref_fit_index(dpref, pref_class)
    l_hat = pref_class[idx]
    lv = l_hat.values if isinstance(l_hat, PreferenceFunction) else np.asarray(l_hat)
    rng = np.random.default_rng(seed)
    ux = rng.choice(instance.n_contexts, size=config.m, p=instance.rho)
    triples = (ux, _sample_actions(rng, instance.pi_ref, ux), _sample_actions(rng, instance.pi_ref, ux))

    pi = np.array(instance.pi_ref, copy=True)
    iterates = [as_policy(pi)]
    ctx = np.arange(instance.n_contexts)
    for _ in range(config.T - 1):
        b_t = _sample_actions(rng, pi, ctx)
        r_hat = lv[ctx, :, b_t]
        if config.exact:
            pi = mirror_step(instance, pi, r_hat, config.beta, config.eta, link).policy
        else:
            pi = as_policy(_regression_step(instance, triples, pi, r_hat, config, link))
        iterates.append(pi)
    mixture = np.mean(np.stack(iterates), axis=0)
    mixture /= mixture.sum(axis=1, keepdims=True)
    return IterativeResult(as_policy(mixture), tuple(iterates), idx)


def run_iterative_chipo(instance: Instance, dpref: PreferenceDataset, pref_class: Sequence,
                        config: IterativeChiPOConfig, seed) -> np.ndarray:
    """Uniform mixture of the Iterative chi-PO iterates ``pi^1 = pi_ref, ..., pi^T``."""
    return run_iterative_chipo_trace(instance, dpref, pref_class, config, seed).policy
