#!/usr/bin/env python3
"""Measure link statistics on a position grid and persist the CKM store
used by the table-compose predictor (`airslab schedule --predictor table`).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from airslab.ckm import build_ckm_store
from airslab.oracle import sampler_from_json
from airslab.scene import load_scenario
from airslab.channel import FadingSpec

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "demo.json"))
    p.add_argument("--n", type=int, default=64, help="stored positions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/ckm_store.jsonl")
    a = p.parse_args()

    scenario = load_scenario(a.scenario)
    spec = scenario.fading or FadingSpec()
    sampler = sampler_from_json(scenario.sampler)
    rng = np.random.default_rng(a.seed)
    positions = [sampler.sample(rng) for _ in range(a.n)]
    store = build_ckm_store(scenario.scene, positions, spec)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    store.save(a.out)
    print(f"stored {len(store.entries)} positions to {a.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
