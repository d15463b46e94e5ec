"""JSON / JSON-lines / CSV serialization.

Instance document::

    {"rho": [...], "r_star": [[...]], "r_max": 1.0, "pi_ref": [[...]],
     "support_aware": false, "context_names": [...], "action_names": [...]}

A named instance wraps it as ``{"instance": {...}, "reward_class": [[[...]]],
"pref": [[[...]]] | null, "pref_class": [...], "comparator": [[...]] | null,
"forbidden_actions": [...], "metadata": {...}}``.  Preference datasets are
JSON lines ``{"x": int, "plus": int, "minus": int}``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .core import ContextDataset, Instance, PreferenceDataset
from .games import PreferenceFunction
from .instances import NamedInstance

FLOAT_FMT = "{:.17g}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "rho": inst.rho.tolist(),
        "r_star": inst.r_star.tolist(),
        "r_max": inst.r_max,
        "pi_ref": inst.pi_ref.tolist(),
        "support_aware": inst.support_aware,
        "context_names": list(inst.context_names),
        "action_names": list(inst.action_names),
    }


def instance_from_dict(d: dict) -> Instance:
    return Instance(
        np.asarray(d["rho"]), np.asarray(d["r_star"]), d["r_max"], np.asarray(d["pi_ref"]),
        bool(d.get("support_aware", False)),
        tuple(d.get("context_names", ())), tuple(d.get("action_names", ())),
    )


def named_to_dict(ni: NamedInstance) -> dict:
    return {
        "instance": instance_to_dict(ni.instance),
        "reward_class": [np.asarray(r).tolist() for r in ni.reward_class],
        "pref": None if ni.pref is None else ni.pref.to_list(),
        "pref_class": [p.to_list() for p in ni.pref_class],
        "comparator": None if ni.comparator is None else np.asarray(ni.comparator).tolist(),
        "forbidden_actions": list(ni.forbidden_actions),
        "metadata": ni.metadata,
    }


def named_from_dict(d: dict) -> NamedInstance:
    return NamedInstance(
        instance_from_dict(d["instance"]),
        tuple(np.asarray(r) for r in d.get("reward_class", [])),
        None if d.get("pref") is None else PreferenceFunction(np.asarray(d["pref"])),
        tuple(PreferenceFunction(np.asarray(p)) for p in d.get("pref_class", [])),
        None if d.get("comparator") is None else np.asarray(d["comparator"]),
        dict(d.get("metadata", {})),
        tuple(d.get("forbidden_actions", ())),
    )


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def save_named(ni: NamedInstance, path) -> None:
    Path(path).write_text(dumps(named_to_dict(ni)) + "\n")


def load_named(path) -> NamedInstance:
    return named_from_dict(json.loads(Path(path).read_text()))


def dataset_to_jsonl(ds: PreferenceDataset) -> str:
    return "".join(json.dumps({"x": x, "plus": p, "minus": m}) + "\n" for x, p, m in ds.tuples())


def dataset_from_jsonl(text: str) -> PreferenceDataset:
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return PreferenceDataset.from_tuples([(r["x"], r["plus"], r["minus"]) for r in rows])


def contexts_to_json(ds: ContextDataset) -> str:
    return json.dumps({"contexts": ds.contexts.tolist()})


def contexts_from_json(text: str) -> ContextDataset:
    return ContextDataset(json.loads(text)["contexts"])


def matrix_to_csv(mat, row_names=(), col_names=()) -> str:
    m = np.asarray(mat, dtype=np.float64)
    rows = list(row_names) or [str(i) for i in range(m.shape[0])]
    cols = list(col_names) or [str(j) for j in range(m.shape[1])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["context", *cols])
    for name, row in zip(rows, m):
        w.writerow([name, *(fmt(v) for v in row)])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
