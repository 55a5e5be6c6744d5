"""Command line for the training pipeline.

Reads the engine's JSONL datasets, writes NCKM weights plus a metrics
JSON {qmae_db, qmre_pct, mae, mre_pct, n_params, infer_ms}.
"""

from __future__ import annotations

import argparse
import json
import sys

from .baselines import baseline_lstm_se, baseline_mlp_lps
from .train import TrainConfig, fit_lps, fit_se, write_metrics


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--k-folds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metrics", default=None)


def _cfg(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch,
        k_folds=args.k_folds, seed=args.seed,
    )


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="ckm-train", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t1 = sub.add_parser("train-lps", help="fit the link-statistics network")
    _common(t1)
    t1.add_argument("--out", required=True, help="NCKM weights output path")

    t2 = sub.add_parser("train-se", help="fit the SE network")
    _common(t2)
    t2.add_argument("--out", required=True)

    b1 = sub.add_parser("baseline-mlp", help="MLP baseline for link statistics")
    _common(b1)
    b2 = sub.add_parser("baseline-lstm", help="LSTM baseline for SE")
    _common(b2)

    args = p.parse_args(argv)
    cfg = _cfg(args)
    if args.command == "train-lps":
        report = fit_lps(args.data, cfg, args.out)
    elif args.command == "train-se":
        report = fit_se(args.data, cfg, args.out)
    elif args.command == "baseline-mlp":
        report = baseline_mlp_lps(args.data, cfg)
    else:
        report = baseline_lstm_se(args.data, cfg)
    if args.metrics:
        write_metrics(report, args.metrics)
    summary = {k: v for k, v in report.items() if k != "loss_history"}
    print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
