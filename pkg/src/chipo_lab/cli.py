"""Command-line entry point: ``python -m chipo_lab <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .core import SolverError
from .io import dumps, matrix_to_csv, named_to_dict

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise bench.ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML config file")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for seed fan-out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chipo-lab", description="Tabular preference-alignment laboratory.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("instance", help="emit a named instance as JSON or CSV matrices")
    _common(p)
    p.add_argument("--kind", help="illustrative, rpo_lower, random, covered_pref_game, general_lower")
    p.add_argument("--n", type=int)
    p.add_argument("--zeta", type=float)
    p.add_argument("--n-contexts", type=int)
    p.add_argument("--n-actions", type=int)
    p.add_argument("--which", type=int)

    p = sub.add_parser("sweep", help="Monte-Carlo regret sweep (needs --config)")
    _common(p)
    p = sub.add_parser("actions", help="action probabilities versus beta")
    _common(p)
    p = sub.add_parser("links", help="link function and inverse curves")
    _common(p)
    p = sub.add_parser("games", help="Iterative chi-PO duality gaps and the impossibility pair")
    _common(p)
    return parser


def _instance_spec(args) -> dict:
    if args.config is not None:
        doc = bench.load_toml(args.config)
        spec = dict(doc.get("instance", doc))
    else:
        spec = {}
    for key in ("kind", "n", "zeta", "n_contexts", "n_actions", "which"):
        val = getattr(args, key)
        if val is not None:
            spec[key] = val
    if args.seed is not None:
        spec["seed"] = args.seed
    if "kind" not in spec:
        raise bench.ConfigError("instance: give --kind or a config with an [instance] table")
    return spec


def _cmd_instance(args) -> None:
    ni = bench.build_instance(_instance_spec(args))
    inst = ni.instance
    if args.format == "json":
        text = dumps(named_to_dict(ni)) + "\n"
        name = "instance.json"
    else:
        text = "# pi_ref\n" + matrix_to_csv(inst.pi_ref, inst.context_names, inst.action_names)
        text += "# r_star\n" + matrix_to_csv(inst.r_star, inst.context_names, inst.action_names)
        name = "instance.csv"
    if args.config is None and args.out_dir == Path("."):
        sys.stdout.write(text)
        return
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / name).write_text(text, encoding="utf-8")
    print(args.out_dir / name)


def _need_config(args, cls):
    if args.config is None:
        return cls()
    return cls.from_toml(args.config)


def _cmd_sweep(args) -> None:
    if args.config is None:
        raise bench.ConfigError("sweep needs --config")
    cfg = bench.with_overrides(bench.SweepConfig.from_toml(args.config), base_seed=args.seed)
    if args.format == "json":
        cfg = bench.with_overrides(cfg, output=str(Path(cfg.output).with_suffix(".json")))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    print(bench.regret_sweep(cfg, args.out_dir, args.jobs, args.format))


def _cmd_actions(args) -> None:
    if args.config is None:
        cfg = bench.ActionsConfig({"kind": "illustrative", "n": 10}, bench.parse_grid(
            {"logspace": [-3, 0, 61]}, "beta_grid"), reward=1)
    else:
        cfg = bench.ActionsConfig.from_toml(args.config)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    print(bench.run_actions(cfg, args.out_dir))


def _cmd_links(args) -> None:
    cfg = _need_config(args, bench.LinksConfig)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    print(bench.run_links(cfg, args.out_dir))


def _cmd_games(args) -> None:
    cfg = bench.with_overrides(_need_config(args, bench.GamesConfig), base_seed=args.seed)
    if args.format == "json":
        cfg = bench.with_overrides(cfg, output=str(Path(cfg.output).with_suffix(".json")),
                                   impossibility_output=str(Path(cfg.impossibility_output).with_suffix(".json")))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for path in bench.dg_experiment(cfg, args.out_dir, args.jobs, args.format):
        print(path)


COMMANDS = {"instance": _cmd_instance, "sweep": _cmd_sweep, "actions": _cmd_actions,
            "links": _cmd_links, "games": _cmd_games}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except bench.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (bench.ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
