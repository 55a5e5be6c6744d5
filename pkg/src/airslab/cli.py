"""Command-line surface: scenario validation, dataset generation, scheduling
runs, and phase-scheme benchmarks emitting plot-ready CSV.

Exit codes: 0 success, 1 domain/validation error, 2 I/O error.  Every run
writes a manifest next to its outputs.  Outputs are byte-reproducible per
(scenario, seed, code version); wall-clock fields are only populated under
``--timing`` since they are inherently non-reproducible.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import ckm as ckmmod
from . import neural, oracle, sched
from .channel import FadingSpec, sample_links
from .scene import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


@dataclass
class RunManifest:
    command: str
    scenario: str
    seed: object
    overrides: dict = field(default_factory=dict)
    version: str = "unknown"
    outputs: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _worker_count() -> int:
    raw = os.environ.get("AIRS_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load(path: str) -> Scenario:
    scenario = load_scenario(path)
    if scenario.fading is None:
        scenario = Scenario(scene=scenario.scene, fading=FadingSpec(), sampler=scenario.sampler)
    return scenario


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    s = scenario.scene
    print(
        f"ok: {s.n_airs} panel(s), {s.n_ues} UE(s), {s.n_rb} RBs x {s.n_slots} slots, "
        f"f_c={s.carrier_freq / 1e9:g} GHz, B={s.bandwidth / 1e6:g} MHz"
    )
    return EXIT_OK


def cmd_dataset(args) -> int:
    try:
        scenario = _load(args.scenario)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    spec = scenario.fading
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    sampler = oracle.sampler_from_json(scenario.sampler)
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        if args.kind == "lps":
            n = oracle.gen_lps_dataset(scenario.scene, sampler, args.n, spec, out)
        else:
            n = oracle.gen_se_dataset(scenario.scene, sampler, args.n, spec, out)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: cannot write {out}: {e}", file=sys.stderr)
        return EXIT_IO
    RunManifest(
        command="dataset",
        scenario=str(args.scenario),
        seed=spec.seed,
        overrides={"kind": args.kind, "n": args.n},
        version=git_describe(),
        outputs=[str(out)],
    ).write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {n} records to {out}")
    return EXIT_OK


def _make_predictor(args, scenario: Scenario, seed: int):
    spec = replace(scenario.fading, seed=seed)
    if args.predictor == "oracle":
        return ckmmod.OraclePredictor(spec=spec)
    if args.predictor == "table":
        if not args.ckm:
            raise ScenarioError("table predictor requires --ckm <store.jsonl>")
        store = ckmmod.CkmStore.load(args.ckm)
        return ckmmod.TableComposePredictor(store=store, seed=seed)
    if args.predictor == "neural":
        if not (args.weights_lps and args.weights_se):
            raise ScenarioError("neural predictor requires --weights-lps and --weights-se")
        return ckmmod.NeuralPredictor(
            ws_lps=neural.load_weights(args.weights_lps),
            ws_se=neural.load_weights(args.weights_se),
        )
    raise ScenarioError(f"unknown predictor {args.predictor!r}")


def _run_schedule(args, scenario: Scenario, seed: int):
    scene = scenario.scene
    predictor = _make_predictor(args, scenario, seed)
    t0 = time.perf_counter()
    se = sched.build_se_matrix(predictor, scene)
    if args.algo == "smib":
        result = sched.sm_ib(
            predictor,
            scene,
            sched.SmIbParams(eps=args.eps, xi=args.xi, n_max=args.nmax, seed=seed),
            se=se,
        )
    elif args.algo == "random":
        result = sched.random_schedule(scene, se, seed=seed)
    elif args.algo == "exact":
        result = sched.exact_enum(predictor, scene, guard=args.guard, se=se)
    else:
        raise ScenarioError(f"unknown algo {args.algo!r}")
    wall_ms = (time.perf_counter() - t0) * 1e3
    sched.validate_schedule(result, se.eta, scene.n_rb)
    return result, se, wall_ms


def cmd_schedule(args) -> int:
    try:
        scenario = _load(args.scenario)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    seeds = [int(s) for s in str(args.seeds).split(",") if s != ""]
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create {out_dir}: {e}", file=sys.stderr)
        return EXIT_IO

    def work(seed: int):
        return seed, _run_schedule(args, scenario, seed)

    try:
        n_workers = min(_worker_count(), max(1, len(seeds)))
        if n_workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=n_workers) as ex:
                results = dict(ex.map(work, seeds))
        else:
            results = dict(work(s) for s in seeds)
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    scene = scenario.scene
    csv_path = out_dir / f"schedule_{args.algo}.csv"
    outputs = []
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["U", "I", "Q", "algo", "min_throughput", "wall_ms"])
        for seed in seeds:  # merge strictly in seed order
            result, se, wall_ms = results[seed]
            jpath = out_dir / f"schedule_{args.algo}_{seed}.json"
            with open(jpath, "w") as jf:
                json.dump(result.to_json_obj(include_timing=args.timing), jf, indent=2, sort_keys=True)
                jf.write("\n")
            outputs.append(str(jpath))
            w.writerow(
                [
                    scene.n_ues,
                    scene.n_airs,
                    scene.n_slots,
                    args.algo,
                    repr(result.min_throughput),
                    repr(wall_ms) if args.timing else "",
                ]
            )
    outputs.append(str(csv_path))
    RunManifest(
        command="schedule",
        scenario=str(args.scenario),
        seed=seeds,
        overrides={
            "algo": args.algo,
            "predictor": args.predictor,
            "eps": args.eps,
            "xi": args.xi,
            "nmax": args.nmax,
        },
        version=git_describe(),
        outputs=outputs,
    ).write(out_dir / f"schedule_{args.algo}.manifest.json")
    for seed in seeds:
        result, _, _ = results[seed]
        print(f"seed {seed}: min throughput {result.min_throughput:.6g}")
    return EXIT_OK


def cmd_bench_phases(args) -> int:
    try:
        scenario = _load(args.scenario)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    scene = scenario.scene
    if scene.n_airs < 1 or scene.n_ues < 1:
        print("error: bench-phases needs at least one panel and one UE", file=sys.stderr)
        return EXIT_DOMAIN
    counts = [int(c) for c in str(args.counts).split(",") if c]
    for c in counts:
        if math.isqrt(c) ** 2 != c:
            print(f"error: element count {c} is not a perfect square", file=sys.stderr)
            return EXIT_DOMAIN
    spec = replace(scenario.fading, seed=args.seed if args.seed is not None else scenario.fading.seed)
    ue = scene.ues[0]
    rows = []
    for c in counts:
        side = math.isqrt(c)
        panel = replace(scene.airs[0], grid=(side, side))
        scene_w = replace(scene, airs=(panel,))
        lr = sample_links(scene_w, ue, spec)
        ses = {}
        for scheme in ("mccm", "los", "random"):
            ses[scheme] = oracle.ergodic_se(scene_w, ue, 0, scheme, spec, lr=lr)
        rows.append((c, ses["mccm"], ses["los"], ses["random"]))
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["w", "mccm_se", "los_se", "random_se"])
            for c, a, b, r in rows:
                w.writerow([c, repr(a), repr(b), repr(r)])
    except OSError as e:
        print(f"error: cannot write {out}: {e}", file=sys.stderr)
        return EXIT_IO
    RunManifest(
        command="bench-phases",
        scenario=str(args.scenario),
        seed=spec.seed,
        overrides={"counts": counts},
        version=git_describe(),
        outputs=[str(out)],
    ).write(out.with_suffix(out.suffix + ".manifest.json"))
    for c, a, b, r in rows:
        print(f"W={c}: mccm={a:.4f} los={b:.4f} random={r:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="airslab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse and validate a scenario file")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("dataset", help="generate a JSONL training dataset")
    d.add_argument("--kind", choices=["lps", "se"], required=True)
    d.add_argument("--scenario", required=True)
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset)

    s = sub.add_parser("schedule", help="run a scheduler and emit JSON + CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--algo", choices=["smib", "random", "exact"], default="smib")
    s.add_argument("--predictor", choices=["oracle", "table", "neural"], default="oracle")
    s.add_argument("--seeds", default="0")
    s.add_argument("--out", required=True)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--xi", type=float, default=1e-2)
    s.add_argument("--nmax", type=int, default=10)
    s.add_argument("--guard", type=int, default=10_000_000)
    s.add_argument("--ckm", default=None, help="CKM store file for the table predictor")
    s.add_argument("--weights-lps", dest="weights_lps", default=None)
    s.add_argument("--weights-se", dest="weights_se", default=None)
    s.add_argument("--timing", action="store_true", help="include wall-clock fields in outputs")
    s.set_defaults(func=cmd_schedule)

    b = sub.add_parser("bench-phases", help="ergodic SE of each phase scheme vs element count")
    b.add_argument("--scenario", required=True)
    b.add_argument("--counts", default="16,64,144")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench_phases)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
