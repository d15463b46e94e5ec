"""Export phi and phi^{-1} curves for the chi-PO and DPO links (CSV + SVG)."""

import argparse
from pathlib import Path

from chipo_lab.bench import LinksConfig, run_links

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "fig1_links.toml")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    print(run_links(LinksConfig.from_toml(args.config), args.out_dir))
