"""Best-beta regret of chi-PO and DPO versus n on the two-context lower-bound instance."""

import argparse
import math
from pathlib import Path

import numpy as np

from chipo_lab.bench import SweepConfig, regret_sweep, summarize_sweep
from chipo_lab.io import read_csv

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "fig3_regret.toml")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = regret_sweep(SweepConfig.from_toml(args.config), args.out_dir, args.jobs)
    rows = [(r["algorithm"], int(r["n"]), float(r["beta"]), int(r["seed"]), float(r["regret"]))
            for r in read_csv(out)]
    best = summarize_sweep(rows)
    print(out)
    for alg in sorted({a for a, _ in best}):
        ns = sorted(n for a, n in best if a == alg)
        regs = [best[alg, n][1] for n in ns]
        slope = np.polyfit(np.log(ns), np.log(regs), 1)[0] if len(ns) > 1 else float("nan")
        cells = "  ".join(f"n={n}: {r:.4g} (beta={best[alg, n][0]:.3g})" for n, r in zip(ns, regs))
        print(f"{alg:6s} slope={slope:+.3f}  {cells}")
    print("reference floor log(2)/(16 log n):",
          "  ".join(f"{math.log(2) / (16 * math.log(n)):.4g}" for n in sorted({n for _, n in best})))
