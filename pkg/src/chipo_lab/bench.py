"""Experiment harness: Monte-Carlo regret sweeps, action/link reports and duality-gap runs.

All entry points take frozen dataclass configs that can be built from TOML
tables (see ``docs/config.md``).  Every random draw comes from a seed list
``[base_seed, n, seed, stream, attempt]`` so rows do not depend on execution
order or on ``jobs``.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import svg
from .algorithms import IterativeChiPOConfig, run_iterative_chipo_trace
from .core import ContextDataset, Instance, PreferenceDataset, expected_return, greedy_policy, point_mass
from .divergences import coverage
from .estimation import (
    FitOptions,
    ObjectiveConfig,
    _pick,
    alignment_loss,
    fit_logit_policy,
    preference_nll,
    reward_diffs,
    sample_contexts,
    sample_general_preferences,
    sample_preferences,
)
from .games import PreferenceFunction, context_gaps, duality_gap, minimax_winner_result, simplex_grid
from .instances import (
    NamedInstance,
    bad_event_holds,
    covered_pref_game,
    general_lower,
    illustrative,
    preference_data_kl,
    random_instance,
    rpo_lower,
)
from .io import load_named, write_csv
from .links import KL, LinkSpec, MixedChi2, link_inverse, link_value
from .solvers import smoothed_chi2_rows, solve_regularized

log = logging.getLogger(__name__)

ALGORITHMS = ("chipo", "dpo", "dpo_sft", "chi2_rlhf", "iter_chipo")
SWEEP_COLUMNS = ("algorithm", "n", "beta", "seed", "regret", "c_one", "kl", "event_resamples")
DG_COLUMNS = ("n", "m", "T", "seed", "duality_gap", "max_ratio")
IMPOSSIBILITY_COLUMNS = ("candidate", "p_a", "p_b", "p_c", "p_d", "dg_1", "dg_2", "dg_sum", "data_kl")
EVENT_FAILED = -1

# seed-stream tags
_DATA, _CONTEXTS, _SELFPLAY = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


# ---------------------------------------------------------------- config parsing

def parse_grid(value, what: str) -> tuple:
    """A list, or a table ``{logspace = [lo, hi, num]}`` / ``{linspace = [lo, hi, num]}``."""
    if isinstance(value, dict):
        if len(value) != 1:
            raise ConfigError(f"{what}: expected exactly one of logspace/linspace")
        (kind, args), = value.items()
        if kind not in ("logspace", "linspace") or len(args) != 3:
            raise ConfigError(f"{what}: expected {{logspace|linspace = [lo, hi, num]}}")
        fn = np.logspace if kind == "logspace" else np.linspace
        out = tuple(float(v) for v in fn(float(args[0]), float(args[1]), int(args[2])))
    elif isinstance(value, (list, tuple)):
        out = tuple(value)
    else:
        raise ConfigError(f"{what}: expected a list or a grid table")
    if not out:
        raise ConfigError(f"{what}: grid is empty")
    return out


def resolve_beta(entry, n: int) -> float:
    """Numbers pass through; ``"n^p"`` means ``n ** p``."""
    if isinstance(entry, str):
        s = entry.replace(" ", "")
        if not s.startswith("n^"):
            raise ConfigError(f"beta entry {entry!r}: use a number or 'n^<power>'")
        try:
            return float(n) ** float(s[2:])
        except ValueError as exc:
            raise ConfigError(f"beta entry {entry!r}: bad exponent") from exc
    return float(entry)


def parse_link(entry) -> tuple[str, LinkSpec]:
    if isinstance(entry, str):
        if entry == "chipo":
            return entry, MixedChi2(1.0)
        if entry in ("dpo", "kl"):
            return entry, KL()
        raise ConfigError(f"unknown link name {entry!r} (use chipo, dpo or a table)")
    if isinstance(entry, dict):
        d = dict(entry)
        name = d.pop("name", None)
        try:
            spec = LinkSpec.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad link table {entry!r}: {exc}") from exc
        return name or spec.name, spec
    raise ConfigError(f"bad link entry {entry!r}")


def build_instance(spec: dict, n: int | None = None) -> NamedInstance:
    """Construct a named instance from a TOML table; ``n`` fills a missing size parameter."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("instance table needs a 'kind'")
    kind = spec["kind"]
    size = spec.get("n", n)
    try:
        if kind == "illustrative":
            return illustrative(int(_need(size, "n")))
        if kind == "rpo_lower":
            return rpo_lower(int(_need(size, "n")), spec.get("zeta"))
        if kind == "random":
            return random_instance(int(spec.get("seed", 0)), int(spec["n_contexts"]), int(spec["n_actions"]),
                                   float(spec.get("r_max", 1.0)))
        if kind == "covered_pref_game":
            return covered_pref_game(int(spec.get("seed", 3)))
        if kind == "general_lower":
            which = int(spec.get("which", 1))
            if which not in (1, 2):
                raise ConfigError("general_lower 'which' must be 1 or 2")
            return general_lower(float(spec.get("C", 2.0)))[which - 1]
        if kind == "file":
            return load_named(_need(spec.get("path"), "path"))
    except KeyError as exc:
        raise ConfigError(f"instance kind {kind!r} needs {exc.args[0]!r}") from exc
    raise ConfigError(f"unknown instance kind {kind!r}")


def _need(v, name):
    if v is None:
        raise ConfigError(f"instance needs {name!r}")
    return v


def _from_table(cls, table: dict, converters: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in table.items():
        kw[k] = converters[k](v) if k in converters else v
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def _fit_options(table) -> FitOptions:
    if isinstance(table, FitOptions):
        return table
    try:
        return FitOptions(**table)
    except TypeError as exc:
        raise ConfigError(f"fit options: {exc}") from exc


@dataclass(frozen=True)
class SweepConfig:
    """Regret sweep over algorithms x sample sizes x regularization x seeds."""

    instance: dict
    algorithms: tuple
    n_grid: tuple
    beta_grid: tuple
    seeds: int
    base_seed: int = 0
    condition_on_event: object = None  # None, "auto" or a list of forbidden actions
    comparator: object = "instance"  # "instance", "greedy", "ref" or an action index
    policy_class: str = "reward_induced"  # or "tabular"
    tie_break: str = "adversarial"
    sft_alpha: float = 1.0
    chi2_eta: object = "theory"  # number, or "theory" for beta / (8 r_max)
    context_samples: int | None = None  # unlabeled contexts for chi2_rlhf, default n
    iter_T: int | None = None
    iter_eta: float | None = None
    iter_m: int | None = None
    fit: FitOptions = field(default_factory=FitOptions)
    max_resamples: int = 1_000_000
    output: str = "regret.csv"
    svg: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        object.__setattr__(self, "beta_grid", tuple(self.beta_grid))
        if not self.algorithms or not self.n_grid or not self.beta_grid:
            raise ConfigError("algorithms, n_grid and beta_grid must be non-empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("sample sizes must be positive")
        for b in self.beta_grid:
            if not resolve_beta(b, 2) > 0:
                raise ConfigError("beta values must be positive")
        if self.policy_class not in ("reward_induced", "tabular"):
            raise ConfigError("policy_class must be 'reward_induced' or 'tabular'")
        if self.tie_break not in ("adversarial", "first", "last"):
            raise ConfigError("tie_break must be adversarial, first or last")
        if self.max_resamples < 1:
            raise ConfigError("max_resamples must be at least 1")
        if not (self.chi2_eta == "theory" or (isinstance(self.chi2_eta, (int, float)) and self.chi2_eta >= 0)):
            raise ConfigError("chi2_eta must be 'theory' or a non-negative number")

    @classmethod
    def from_dict(cls, table: dict) -> "SweepConfig":
        t = dict(table)
        if "beta_logspace" in t:
            t["beta_grid"] = {"logspace": t.pop("beta_logspace")}
        return _from_table(cls, t, {
            "beta_grid": lambda v: parse_grid(v, "beta_grid"),
            "n_grid": lambda v: parse_grid(v, "n_grid"),
            "fit": _fit_options,
        })

    @classmethod
    def from_toml(cls, path) -> "SweepConfig":
        doc = load_toml(path)
        return cls.from_dict(doc.get("sweep", doc))


# ---------------------------------------------------------------- regret sweep

def _link_for(alg: str) -> LinkSpec:
    return MixedChi2(1.0) if alg in ("chipo", "chi2_rlhf", "iter_chipo") else KL()


def _objective(alg: str, beta: float, cfg: SweepConfig, r_max: float) -> ObjectiveConfig:
    if alg == "chipo":
        return ObjectiveConfig.chipo(beta, r_max)
    if alg == "dpo":
        return ObjectiveConfig.dpo(beta, r_max)
    return ObjectiveConfig.dpo_sft(beta, cfg.sft_alpha, r_max)


def comparator_policy(ni: NamedInstance, spec) -> np.ndarray:
    inst = ni.instance
    if spec == "instance":
        return ni.comparator if ni.comparator is not None else greedy_policy(inst)
    if spec == "greedy":
        return greedy_policy(inst)
    if spec == "ref":
        return np.array(inst.pi_ref)
    if isinstance(spec, int) and not isinstance(spec, bool):
        if not 0 <= spec < inst.n_actions:
            raise ConfigError(f"comparator action {spec} out of range")
        return point_mass(*inst.shape, spec)
    raise ConfigError(f"bad comparator {spec!r}")


def forbidden_actions(ni: NamedInstance, spec) -> tuple:
    if spec is None:
        return ()
    if spec == "auto":
        return tuple(ni.forbidden_actions)
    if isinstance(spec, (list, tuple)) and all(isinstance(a, int) for a in spec):
        return tuple(spec)
    raise ConfigError(f"bad condition_on_event {spec!r}")


def sample_conditioned(ni: NamedInstance, n: int, seed_prefix: Sequence[int], forbidden: tuple,
                       max_resamples: int) -> tuple[PreferenceDataset, int]:
    """Rejection-sample until no forbidden action appears.

    Returns the dataset and the number of rejected draws, or ``EVENT_FAILED``
    (with the last draw) when the event never held.
    """
    inst = ni.instance
    for attempt in range(max_resamples + 1):
        seed = [*seed_prefix, _DATA, attempt]
        if ni.reward_class or ni.pref is None:
            data = sample_preferences(inst, n, seed)
        else:
            data = sample_general_preferences(inst, ni.pref.values, n, seed)
        if not forbidden or bad_event_holds(data, forbidden):
            return data, attempt
    log.warning("event never held for n=%d within %d resamples", n, max_resamples)
    return data, EVENT_FAILED


@dataclass
class _Prepared:
    """Per-(n) quantities shared by every seed: induced policies and their true values."""

    ni: NamedInstance
    comparator: np.ndarray
    betas: tuple
    induced: dict  # (alg, beta_index) -> list of policies
    values: dict  # (alg, beta_index) -> array of true values
    smoothed: dict  # beta_index -> (eta, list of full-support smoothed policies)


def _prepare(cfg: SweepConfig, n: int) -> _Prepared:
    ni = build_instance(cfg.instance, n)
    inst = ni.instance
    rclass = ni.reward_class or (inst.r_star,)
    betas = tuple(resolve_beta(b, n) for b in cfg.beta_grid)
    induced, values, smoothed = {}, {}, {}
    for alg in cfg.algorithms:
        if alg in ("chipo", "dpo", "dpo_sft") and cfg.policy_class == "reward_induced":
            for j, beta in enumerate(betas):
                pols = [solve_regularized(inst, r, beta, _link_for(alg)).policy for r in rclass]
                induced[alg, j] = pols
                values[alg, j] = np.array([expected_return(inst, p) for p in pols])
        if alg == "chi2_rlhf":
            for j, beta in enumerate(betas):
                eta = beta / (8.0 * inst.r_max) if cfg.chi2_eta == "theory" else float(cfg.chi2_eta)
                pols = [smoothed_chi2_rows(inst.pi_ref, r, beta, eta).policy for r in rclass]
                smoothed[j] = (eta, pols)
                values[alg, j] = np.array([expected_return(inst, p) for p in pols])
    return _Prepared(ni, comparator_policy(ni, cfg.comparator), betas, induced, values, smoothed)


def _tie(cfg: SweepConfig, vals):
    if cfg.tie_break != "adversarial":
        return cfg.tie_break
    return lambda i: float(vals[i])


def _sweep_rows(cfg: SweepConfig, n: int, seeds: Sequence[int]) -> list[tuple]:
    prep = _prepare(cfg, n)
    ni, inst = prep.ni, prep.ni.instance
    rclass = ni.reward_class or (inst.r_star,)
    idx = list(range(len(rclass)))
    j_comp = expected_return(inst, prep.comparator)
    forbidden = forbidden_actions(ni, cfg.condition_on_event)
    rows = []
    for s in seeds:
        prefix = [cfg.base_seed, n, s]
        data, resamples = sample_conditioned(ni, n, prefix, forbidden, cfg.max_resamples)
        nll = {}

        def nll_for(radius):
            if radius not in nll:
                nll[radius] = np.array([preference_nll(reward_diffs(r), data, radius) for r in rclass])
            return nll[radius]

        for alg in cfg.algorithms:
            for j, beta in enumerate(prep.betas):
                policy = _run_one(cfg, prep, alg, j, beta, data, prefix, nll_for, idx, rclass, n)
                cov = coverage(inst, policy)
                rows.append((alg, n, beta, s, j_comp - expected_return(inst, policy), cov.c_one, cov.kl, resamples))
    return rows


def _run_one(cfg, prep, alg, j, beta, data, prefix, nll_for, idx, rclass, n):
    inst = prep.ni.instance
    if alg in ("chipo", "dpo", "dpo_sft"):
        obj = _objective(alg, beta, cfg, inst.r_max)
        if cfg.policy_class == "tabular":
            return fit_logit_policy(inst, data, obj, cfg.fit)
        pols, vals = prep.induced[alg, j], prep.values[alg, j]
        if obj.sft_weight_alpha == 0:
            scores = nll_for(obj.clip_radius)
        else:
            scores = np.array([alignment_loss(p, data, inst, obj) for p in pols])
        return pols[_pick(scores, _tie(cfg, vals), idx)]
    if alg == "chi2_rlhf":
        eta, full = prep.smoothed[j]
        k = _pick(nll_for(math.inf), _tie(cfg, prep.values[alg, j]), idx)
        m = cfg.context_samples or n
        dx = ContextDataset(sample_contexts(inst, m, [*prefix, _CONTEXTS, 0]))
        seen = dx.weights(inst.n_contexts) > 0
        out = np.array(inst.pi_ref, copy=True)
        out[seen] = full[k][seen]
        return out
    # iter_chipo
    m = cfg.iter_m or n
    base = IterativeChiPOConfig.theory(n, m)
    T = cfg.iter_T or base.T
    eta = cfg.iter_eta or 1.0 / T
    pclass = tuple(PreferenceFunction.from_reward(r) for r in rclass)
    res = run_iterative_chipo_trace(inst, data, pclass, IterativeChiPOConfig(beta, eta, T, m), [*prefix, _SELFPLAY, 0])
    return res.policy


def _chunks(seq, k):
    k = max(1, min(k, len(seq)))
    return [seq[i::k] for i in range(k)]


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> list[tuple]:
    """All sweep rows, sorted by (algorithm, n, beta, seed)."""
    seeds = list(range(cfg.seeds))
    tasks = [(cfg, n, chunk) for n in cfg.n_grid for chunk in _chunks(seeds, jobs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_sweep_task, tasks))
    else:
        parts = [_sweep_task(t) for t in tasks]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows


def _sweep_task(task):
    cfg, n, seeds = task
    return _sweep_rows(cfg, n, seeds)


def summarize_sweep(rows) -> dict:
    """``{(algorithm, n): (best_beta, mean_regret)}`` taking the best mean over the beta grid."""
    acc: dict = {}
    for alg, n, beta, _seed, reg, *_ in rows:
        acc.setdefault((alg, n, beta), []).append(reg)
    best: dict = {}
    for (alg, n, beta), vals in sorted(acc.items()):
        mean = float(np.mean(vals))
        if (alg, n) not in best or mean < best[alg, n][1]:
            best[alg, n] = (beta, mean)
    return best


def regret_sweep(cfg: SweepConfig, out_dir=".", jobs: int = 1, fmt: str = "csv") -> Path:
    """Run the sweep and write the table (plus an optional best-beta regret plot)."""
    rows = run_sweep(cfg, jobs)
    out = Path(out_dir) / cfg.output
    write_table(out, SWEEP_COLUMNS, rows, fmt)
    if cfg.svg:
        best = summarize_sweep(rows)
        series = {}
        for (alg, n), (_b, mean) in sorted(best.items()):
            xs, ys = series.setdefault(alg, ([], []))
            xs.append(n)
            ys.append(mean)
        panel = svg.Panel("Best-beta mean regret", series, "n", "regret", logx=True, logy=True)
        (Path(out_dir) / cfg.svg).write_text(svg.render([panel]), encoding="utf-8")
    return out


def write_table(path, header, rows, fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        write_csv(path, header, rows)
    elif fmt == "json":
        path.parent.mkdir(parents=True, exist_ok=True)
        recs = [dict(zip(header, (_jsonable(v) for v in row))) for row in rows]
        path.write_text(json.dumps(recs, indent=1) + "\n", encoding="utf-8")
    else:
        raise ConfigError(f"unknown format {fmt!r}")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


# ---------------------------------------------------------------- action distributions

@dataclass(frozen=True)
class ActionsConfig:
    instance: dict
    beta_grid: tuple
    links: tuple = ("chipo", "dpo")
    reward: object = "truth"  # "truth" or a reward-class index
    output: str = "actions.csv"
    svg: str | None = "actions.svg"

    @classmethod
    def from_dict(cls, table: dict) -> "ActionsConfig":
        t = dict(table)
        if "beta_logspace" in t:
            t["beta_grid"] = {"logspace": t.pop("beta_logspace")}
        return _from_table(cls, t, {"beta_grid": lambda v: tuple(float(b) for b in parse_grid(v, "beta_grid")),
                                    "links": tuple})

    @classmethod
    def from_toml(cls, path) -> "ActionsConfig":
        doc = load_toml(path)
        return cls.from_dict(doc.get("actions", doc))


def action_distribution_report(instance: Instance, reward, policies, betas, csv_path=None, svg_path=None,
                               title: str = "Action probabilities") -> list[tuple]:
    """Per-action probabilities of each named policy across ``betas``.

    ``policies`` holds ``(name, LinkSpec)`` pairs, whose policy is induced from
    ``reward`` at each beta, or ``(name, array)`` pairs for fixed policies.
    Rows are ``(policy, beta, context, action, prob)``.
    """
    betas = tuple(float(b) for b in betas)
    if not betas:
        raise ConfigError("beta grid is empty")
    rows = []
    for name, spec in policies:
        for beta in betas:
            if isinstance(spec, LinkSpec):
                pol = solve_regularized(instance, reward, beta, spec).policy
            else:
                pol = instance.check_shape(spec, "policy")
            for x in range(instance.n_contexts):
                for a in range(instance.n_actions):
                    rows.append((name, beta, x, a, float(pol[x, a])))
    if csv_path is not None:
        write_csv(csv_path, ("policy", "beta", "context", "action", "prob"), rows)
    if svg_path is not None:
        names = instance.action_names or tuple(f"a{i}" for i in range(instance.n_actions))
        panels = []
        for name, _spec in policies:
            series = {}
            for x in range(instance.n_contexts):
                for a in range(instance.n_actions):
                    label = names[a] if instance.n_contexts == 1 else f"x{x}:{names[a]}"
                    ys = [p for (nm, _b, cx, ca, p) in rows if nm == name and cx == x and ca == a]
                    series[label] = (list(betas), ys)
            panels.append(svg.Panel(f"{title}: {name}", series, "beta", "probability", logx=True))
        Path(svg_path).parent.mkdir(parents=True, exist_ok=True)
        Path(svg_path).write_text(svg.render(panels), encoding="utf-8")
    return rows


def run_actions(cfg: ActionsConfig, out_dir=".") -> Path:
    ni = build_instance(cfg.instance)
    inst = ni.instance
    if cfg.reward == "truth":
        reward = inst.r_star
    elif isinstance(cfg.reward, int) and 0 <= cfg.reward < len(ni.reward_class):
        reward = ni.reward_class[cfg.reward]
    else:
        raise ConfigError(f"reward must be 'truth' or a reward-class index, got {cfg.reward!r}")
    policies = [parse_link(e) for e in cfg.links] + [("pi_ref", np.array(inst.pi_ref))]
    out = Path(out_dir) / cfg.output
    action_distribution_report(inst, reward, policies, cfg.beta_grid, out,
                               Path(out_dir) / cfg.svg if cfg.svg else None)
    return out


# ---------------------------------------------------------------- link curves

@dataclass(frozen=True)
class LinksConfig:
    links: tuple = ("chipo", "dpo")
    z_grid: tuple = field(default_factory=lambda: tuple(float(v) for v in np.linspace(0.05, 5.0, 100)))
    y_grid: tuple = field(default_factory=lambda: tuple(float(v) for v in np.linspace(-3.0, 5.0, 161)))
    output: str = "links.csv"
    svg: str | None = "links.svg"

    @classmethod
    def from_dict(cls, table: dict) -> "LinksConfig":
        grid = lambda what: lambda v: tuple(float(x) for x in parse_grid(v, what))  # noqa: E731
        return _from_table(cls, dict(table), {"links": tuple, "z_grid": grid("z_grid"), "y_grid": grid("y_grid")})

    @classmethod
    def from_toml(cls, path) -> "LinksConfig":
        doc = load_toml(path)
        return cls.from_dict(doc.get("links", doc))


def inverse_bounds(y) -> tuple[np.ndarray, np.ndarray]:
    """Envelope of the gamma = 1 mixed link inverse: ``[y/2, y]`` for ``y >= 1``, ``[e^{y-e}, e^y]`` below."""
    y = np.asarray(y, dtype=np.float64)
    lo = np.where(y >= 1, y / 2, np.exp(np.minimum(y, 1.0) - math.e))
    hi = np.where(y >= 1, y, np.exp(np.minimum(y, 1.0)))
    return lo, hi


def link_curve_export(specs, z_grid, y_grid, csv_path=None, svg_path=None) -> list[tuple]:
    """Rows ``(link, curve, input, value)`` for ``phi`` on ``z_grid`` and ``phi^{-1}`` on ``y_grid``.

    For ``MixedChi2(1)`` links the inverse envelope is added as curves
    ``phi_inv_lower`` / ``phi_inv_upper``.
    """
    z = np.asarray(z_grid, dtype=np.float64)
    y = np.asarray(y_grid, dtype=np.float64)
    if z.size == 0 or y.size == 0:
        raise ConfigError("link grids must be non-empty")
    if np.any(z <= 0):
        raise ConfigError("z grid must be strictly positive")
    rows = []
    for name, spec in specs:
        for zi, v in zip(z, link_value(spec, z)):
            rows.append((name, "phi", float(zi), float(v)))
        for yi, v in zip(y, link_inverse(spec, y)):
            rows.append((name, "phi_inv", float(yi), float(v)))
        if spec == MixedChi2(1.0):
            lo, hi = inverse_bounds(y)
            rows += [(name, "phi_inv_lower", float(a), float(b)) for a, b in zip(y, lo)]
            rows += [(name, "phi_inv_upper", float(a), float(b)) for a, b in zip(y, hi)]
    if csv_path is not None:
        write_csv(csv_path, ("link", "curve", "input", "value"), rows)
    if svg_path is not None:
        def series(curves):
            out = {}
            for name, curve, x, v in rows:
                if curve in curves:
                    xs, ys = out.setdefault(f"{name} {curve}" if curve != curves[0] else name, ([], []))
                    xs.append(x)
                    ys.append(v)
            return out
        panels = [svg.Panel("Link phi(z)", series(("phi",)), "z", "phi"),
                  svg.Panel("Inverse link", series(("phi_inv", "phi_inv_lower", "phi_inv_upper")), "y", "phi^-1",
                            logy=True)]
        Path(svg_path).parent.mkdir(parents=True, exist_ok=True)
        Path(svg_path).write_text(svg.render(panels), encoding="utf-8")
    return rows


def run_links(cfg: LinksConfig, out_dir=".") -> Path:
    out = Path(out_dir) / cfg.output
    link_curve_export([parse_link(e) for e in cfg.links], cfg.z_grid, cfg.y_grid, out,
                      Path(out_dir) / cfg.svg if cfg.svg else None)
    return out


# ---------------------------------------------------------------- duality-gap experiments

@dataclass(frozen=True)
class GamesConfig:
    instance: dict = field(default_factory=lambda: {"kind": "covered_pref_game"})
    n_grid: tuple = (1000, 10000)
    m_grid: tuple = (10000,)
    T_grid: tuple = (64,)
    seeds: int = 20
    base_seed: int = 0
    beta: float | None = 0.02  # None: 1/sqrt(T)
    eta: float | None = 0.1  # None: 1/T
    impossibility: bool = True
    mesh: int = 100
    C: float = 2.0
    output: str = "dg.csv"
    impossibility_output: str = "dg_impossibility.csv"

    def __post_init__(self):
        for name in ("n_grid", "m_grid", "T_grid"):
            vals = tuple(int(v) for v in getattr(self, name))
            if not vals or min(vals) < 1:
                raise ConfigError(f"{name} must be a non-empty list of positive integers")
            object.__setattr__(self, name, vals)
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.mesh < 1:
            raise ConfigError("mesh must be at least 1")

    @classmethod
    def from_dict(cls, table: dict) -> "GamesConfig":
        return _from_table(cls, dict(table), {})

    @classmethod
    def from_toml(cls, path) -> "GamesConfig":
        doc = load_toml(path)
        return cls.from_dict(doc.get("games", doc))


def _dg_task(task):
    cfg, n, m, T, seeds = task
    ni = build_instance(cfg.instance)
    if ni.pref is None or not ni.pref_class:
        raise ConfigError("games instance needs a preference function and class")
    inst = ni.instance
    beta = cfg.beta if cfg.beta is not None else 1.0 / math.sqrt(T)
    eta = cfg.eta if cfg.eta is not None else 1.0 / T
    it_cfg = IterativeChiPOConfig(beta, eta, T, m)
    ref = np.where(inst.support, inst.pi_ref, 1.0)
    rows = []
    for s in seeds:
        prefix = [cfg.base_seed, n, m, T, s]
        data = sample_general_preferences(inst, ni.pref.values, n, [*prefix, _DATA, 0])
        res = run_iterative_chipo_trace(inst, data, ni.pref_class, it_cfg, [*prefix, _SELFPLAY, 0])
        ratio = max(float(np.max(np.where(inst.support, p / ref, 0.0))) for p in res.iterates)
        rows.append((n, m, T, s, duality_gap(inst.rho, ni.pref, res.policy), ratio))
    return rows


def impossibility_grid(C: float = 2.0, mesh: int = 100) -> tuple[float, np.ndarray]:
    """Minimum over the grid of ``DG(pi; l1) + DG(pi; l2)`` and its argmin."""
    one, two = general_lower(C)
    grid = simplex_grid(4, mesh)[:, None, :]
    total = context_gaps(one.pref, grid)[:, 0] + context_gaps(two.pref, grid)[:, 0]
    i = int(np.argmin(total))
    return float(total[i]), grid[i, 0]


def impossibility_rows(C: float = 2.0, mesh: int = 100) -> list[tuple]:
    one, two = general_lower(C)
    kl = preference_data_kl(one, two)
    cands = [(f"point_{name}", np.eye(4)[i]) for i, name in enumerate("abcd")]
    cands += [("pi_ref", np.array(one.instance.pi_ref[0])), ("uniform", np.full(4, 0.25))]
    for label, ni in (("minimax_1", one), ("minimax_2", two)):
        cands.append((label, minimax_winner_result(ni.instance.rho, ni.pref).policy[0]))
    rows = []
    for label, p in cands:
        g1 = duality_gap(one.instance.rho, one.pref, p[None])
        g2 = duality_gap(two.instance.rho, two.pref, p[None])
        rows.append((label, *map(float, p), g1, g2, g1 + g2, kl))
    low, arg = impossibility_grid(C, mesh)
    g1 = duality_gap(one.instance.rho, one.pref, arg[None])
    g2 = duality_gap(two.instance.rho, two.pref, arg[None])
    rows.append(("grid_min", *map(float, arg), g1, g2, low, kl))
    return rows


def dg_experiment(cfg: GamesConfig, out_dir=".", jobs: int = 1, fmt: str = "csv") -> list[Path]:
    seeds = list(range(cfg.seeds))
    tasks = [(cfg, n, m, T, chunk) for n in cfg.n_grid for m in cfg.m_grid for T in cfg.T_grid
             for chunk in _chunks(seeds, jobs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_dg_task, tasks))
    else:
        parts = [_dg_task(t) for t in tasks]
    rows = sorted((r for p in parts for r in p), key=lambda r: r[:4])
    outs = [Path(out_dir) / cfg.output]
    write_table(outs[0], DG_COLUMNS, rows, fmt)
    if cfg.impossibility:
        outs.append(Path(out_dir) / cfg.impossibility_output)
        write_table(outs[1], IMPOSSIBILITY_COLUMNS, impossibility_rows(cfg.C, cfg.mesh), fmt)
    return outs


def with_overrides(cfg, **kw):
    """Replace fields whose override is not None."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
