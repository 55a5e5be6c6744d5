import json
from pathlib import Path

import pytest

from airslab.cli import main as airslab_cli

DEMO = Path(__file__).resolve().parent.parent.parent / "scenarios" / "demo.json"


def _write_scenario(path: Path, stress: bool, n_large: int, n_small: int) -> Path:
    doc = json.loads(DEMO.read_text())
    doc["fading"].update({"n_large": n_large, "n_small": n_small})
    if stress:
        # strong, noisy amplification: the regime where dynamic noise and the
        # reflected signal co-move, which independent-draw composition misses
        doc["fading"]["shadow_sigma_nlos_db"] = 7.0
        for a in doc["airs"]:
            a["amp_power_dbm"] = 30.0
            a["dyn_noise_psd_dbm_hz"] = -140.0
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="session")
def tiny_datasets(tmp_path_factory):
    """Small fast datasets for unit tests."""
    base = tmp_path_factory.mktemp("tiny")
    scenario = _write_scenario(base / "scene.json", stress=False, n_large=2, n_small=10)
    lps = base / "lps.jsonl"
    se = base / "se.jsonl"
    assert airslab_cli(["dataset", "--kind", "lps", "--scenario", str(scenario),
                        "--n", "80", "--seed", "5", "--out", str(lps)]) == 0
    assert airslab_cli(["dataset", "--kind", "se", "--scenario", str(scenario),
                        "--n", "60", "--seed", "6", "--out", str(se)]) == 0
    return {"scenario": scenario, "lps": lps, "se": se}


@pytest.fixture(scope="session")
def toy_datasets(tmp_path_factory):
    """The 2000-record toy datasets used by the acceptance criteria."""
    base = tmp_path_factory.mktemp("toy")
    scenario = _write_scenario(base / "scene.json", stress=True, n_large=4, n_small=60)
    lps = base / "lps2000.jsonl"
    se = base / "se2000.jsonl"
    assert airslab_cli(["dataset", "--kind", "lps", "--scenario", str(scenario),
                        "--n", "2000", "--seed", "31", "--out", str(lps)]) == 0
    assert airslab_cli(["dataset", "--kind", "se", "--scenario", str(scenario),
                        "--n", "2000", "--seed", "31", "--out", str(se)]) == 0
    return {"scenario": scenario, "lps": lps, "se": se}
