"""Action probabilities of chi-PO and DPO policies induced by the wrong reward on the illustrative instance."""

import argparse
import math
from pathlib import Path

from chipo_lab.bench import ActionsConfig, run_actions
from chipo_lab.io import read_csv

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "fig2_actions.toml")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    cfg = ActionsConfig.from_toml(args.config)
    out = run_actions(cfg, args.out_dir)
    n = cfg.instance.get("n", 10)
    cutoff = 1.0 / (2.0 * math.log(n))
    rows = [r for r in read_csv(out) if float(r["beta"]) <= cutoff and r["action"] in ("0", "2")]
    print(out)
    print(f"beta <= {cutoff:.4f}:")
    for name in ("chipo", "dpo"):
        a0 = [float(r["prob"]) for r in rows if r["policy"] == name and r["action"] == "0"]
        bad = [float(r["prob"]) for r in rows if r["policy"] == name and r["action"] == "2"]
        print(f"  {name:6s} pi(a0) in [{min(a0):.3f}, {max(a0):.3f}]  pi(a2) in [{min(bad):.3f}, {max(bad):.3f}]")
