import csv
import io
import json
import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from chipo_lab.core import ContextDataset
from chipo_lab.estimation import sample_preferences
from chipo_lab.instances import covered_pref_game, general_lower, illustrative, random_instance
from chipo_lab.io import (
    contexts_from_json,
    contexts_to_json,
    dataset_from_jsonl,
    dataset_to_jsonl,
    fmt,
    instance_from_dict,
    instance_to_dict,
    load_named,
    matrix_to_csv,
    named_from_dict,
    named_to_dict,
    read_csv,
    save_named,
    write_csv,
)


def test_float_format_round_trips_exactly():
    for v in (0.1, 1 / 3, math.pi * 1e-300, 2.0 ** 0.5 * 1e17):
        assert float(fmt(v)) == v
    assert fmt(np.float64(0.5)) == "0.5"
    assert fmt(np.int64(7)) == "7"
    assert fmt(True) == "true"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_any_float_survives_text(v):
    assert float(fmt(v)) == v


def test_instance_json_round_trip():
    for ni in (illustrative(2), random_instance(3, 2, 5)):
        d = json.loads(json.dumps(instance_to_dict(ni.instance)))
        back = instance_from_dict(d)
        assert back == ni.instance
        assert back.support_aware == ni.instance.support_aware
        assert back.action_names == ni.instance.action_names


def test_named_instance_round_trip(tmp_path):
    for ni in (illustrative(10), general_lower(3.0)[1], covered_pref_game()):
        path = tmp_path / "inst.json"
        save_named(ni, path)
        back = load_named(path)
        assert back.instance == ni.instance
        assert len(back.reward_class) == len(ni.reward_class)
        assert all(np.array_equal(a, b) for a, b in zip(back.reward_class, ni.reward_class))
        assert (back.pref is None) == (ni.pref is None)
        if ni.pref is not None:
            assert np.array_equal(back.pref.values, ni.pref.values)
        assert back.forbidden_actions == ni.forbidden_actions
        assert back.metadata == json.loads(json.dumps(ni.metadata))
    assert named_from_dict(named_to_dict(illustrative(5))).metadata["n"] == 5


def test_dataset_jsonl_round_trip():
    ds = sample_preferences(random_instance(1, 3, 4).instance, 50, 2)
    text = dataset_to_jsonl(ds)
    assert json.loads(text.splitlines()[0]).keys() == {"x", "plus", "minus"}
    assert dataset_from_jsonl(text).tuples() == ds.tuples()
    assert len(dataset_from_jsonl("")) == 0


def test_context_dataset_round_trip():
    dx = ContextDataset([0, 2, 2, 1])
    assert np.array_equal(contexts_from_json(contexts_to_json(dx)).contexts, dx.contexts)


def test_matrix_csv_layout():
    text = matrix_to_csv(np.array([[0.5, 0.25], [1.0, 0.0]]), ("x1", "x2"), ("a", "b"))
    rows = list(csv.reader(io.StringIO(text)))
    assert rows == [["context", "a", "b"], ["x1", "0.5", "0.25"], ["x2", "1", "0"]]


def test_write_and_read_csv(tmp_path):
    path = tmp_path / "sub" / "t.csv"
    write_csv(path, ("name", "value"), [("a", 0.1), ("b", 2)])
    assert path.read_bytes() == b"name,value\na,0.10000000000000001\nb,2\n"
    assert read_csv(path) == [{"name": "a", "value": "0.10000000000000001"}, {"name": "b", "value": "2"}]
