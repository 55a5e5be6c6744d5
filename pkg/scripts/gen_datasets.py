#!/usr/bin/env python3
"""Generate the JSONL training datasets consumed by the trainer package."""

import argparse
import sys
from pathlib import Path

from airslab.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "demo.json"))
    p.add_argument("--n-lps", type=int, default=2000)
    p.add_argument("--n-se", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    a = p.parse_args()
    out = Path(a.out_dir)
    rc = cli_main(["dataset", "--kind", "lps", "--scenario", a.scenario,
                   "--n", str(a.n_lps), "--seed", str(a.seed),
                   "--out", str(out / "lps_train.jsonl")])
    if rc:
        return rc
    return cli_main(["dataset", "--kind", "se", "--scenario", a.scenario,
                     "--n", str(a.n_se), "--seed", str(a.seed + 1),
                     "--out", str(out / "se_train.jsonl")])


if __name__ == "__main__":
    sys.exit(main())
