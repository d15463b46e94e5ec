import json
import subprocess
import sys
from pathlib import Path

import pytest

from chipo_lab.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from chipo_lab.io import named_from_dict, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_instance_json_to_stdout(capsys):
    assert main(["instance", "--kind", "illustrative", "--n", "10", "--format", "json"]) == EXIT_OK
    ni = named_from_dict(json.loads(capsys.readouterr().out))
    assert ni.instance.pi_ref.tolist() == [[0.5, 0.05, 0.05, 0.4]]


def test_instance_csv_to_file(tmp_path):
    assert main(["instance", "--kind", "rpo_lower", "--n", "10", "--out-dir", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "instance.csv").read_text()
    assert text.startswith("# pi_ref\ncontext,a0,a1,a2,a3\nx1,0.5,0.050000000000000003")


def test_instance_from_config(tmp_path):
    cfg = _write(tmp_path, "i.toml", '[instance]\nkind = "general_lower"\nwhich = 2\nC = 3.0\n')
    assert main(["instance", "--config", str(cfg), "--out-dir", str(tmp_path), "--format", "json"]) == EXIT_OK
    doc = json.loads((tmp_path / "instance.json").read_text())
    assert doc["metadata"]["name"] == "general_lower_2"


def test_missing_kind_is_config_error():
    assert main(["instance"]) == EXIT_CONFIG


def test_unknown_flag_is_config_error():
    assert main(["links", "--colour", "red"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["links", "--format", "xml"]) == EXIT_CONFIG


def test_sweep_requires_config():
    assert main(["sweep"]) == EXIT_CONFIG


def test_missing_and_malformed_config(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG
    bad = _write(tmp_path, "bad.toml", "[sweep\nseeds = 1")
    assert main(["sweep", "--config", str(bad)]) == EXIT_CONFIG
    wrong = _write(tmp_path, "w.toml", '[sweep]\nalgorithms = ["ppo"]\nn_grid = [5]\nbeta_grid = [1.0]\nseeds = 1\n'
                                      '[sweep.instance]\nkind = "illustrative"\n')
    assert main(["sweep", "--config", str(wrong)]) == EXIT_CONFIG


def test_bad_jobs_is_config_error():
    assert main(["links", "--jobs", "0"]) == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, "a.toml", '[actions]\nbeta_grid = [1e-300]\n'
                                     'links = [{kind = "alpha_mixed", alpha = 0.5, gamma = 1.0}]\n'
                                     '[actions.instance]\nkind = "illustrative"\nn = 10\n')
    assert main(["actions", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_SOLVER


def test_sweep_writes_csv_and_seed_override_changes_rows(tmp_path):
    cfg = CONFIGS / "smoke_sweep.toml"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "a")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "c"), "--seed", "7"]) == EXIT_OK
    a, b, c = ((tmp_path / d / "smoke.csv").read_bytes() for d in "abc")
    assert a == b
    assert a != c


def test_sweep_json_format(tmp_path):
    cfg = CONFIGS / "smoke_sweep.toml"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path), "--format", "json"]) == EXIT_OK
    recs = json.loads((tmp_path / "smoke.json").read_text())
    assert recs[0]["algorithm"] == "chi2_rlhf"


def test_actions_and_links_defaults(tmp_path):
    assert main(["actions", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert main(["links", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert read_csv(tmp_path / "actions.csv")[0].keys() == {"policy", "beta", "context", "action", "prob"}
    assert (tmp_path / "links.svg").exists()


def test_games_small_config(tmp_path):
    cfg = _write(tmp_path, "g.toml", "[games]\nn_grid = [50]\nm_grid = [20]\nT_grid = [3]\nseeds = 2\nmesh = 10\n")
    assert main(["games", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "dg.csv")
    assert len(rows) == 2
    assert float(read_csv(tmp_path / "dg_impossibility.csv")[-1]["dg_sum"]) >= 0.5


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chipo_lab", "instance", "--kind", "covered_pref_game",
                           "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["metadata"]["name"] == "covered_pref_game"
    proc = subprocess.run([sys.executable, "-m", "chipo_lab", "sweep"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2
