"""Fit the two predictors on JSONL datasets and export NCKM weights.

Targets are standardised (z-score from the training split) for optimisation
and the scale is folded back into the output heads before export, so the
exported weights produce raw dB / bps-per-Hz outputs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import data as D
from . import export, losses, nckm
from .models import LpsNet, SeNet, count_params, fold_output_scale


@dataclass
class TrainConfig:
    lr: float = 1e-5
    weight_decay: float = 1e-5
    split: tuple = (0.8, 0.1, 0.1)
    k_folds: int = 1
    epochs: int = 30
    batch_size: int = 32
    delta_lps: float = 0.5
    gamma: float = 0.2
    eta: float = 20.0
    delta_se: float = 1.0
    dropout: float = 0.1
    seed: int = 0
    dims: Optional[dict] = None

    def validate(self) -> None:
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        if not (0.0 < self.delta_lps < 1.0):
            raise ValueError("delta_lps must lie in (0, 1)")
        if not (0.0 < self.delta_se <= 1.0):
            raise ValueError("delta_se must lie in (0, 1]")


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for k in range(0, n, batch_size):
        yield perm[k : k + batch_size]


def _standardise(values: np.ndarray, mask: Optional[np.ndarray] = None) -> tuple[float, float]:
    v = values[mask] if mask is not None else values
    mu = float(np.mean(v))
    sigma = float(np.std(v))
    return mu, max(sigma, 1e-6)


class NanLoss(RuntimeError):
    pass


def _check_finite(loss: torch.Tensor, epoch: int, step: int) -> None:
    if not torch.isfinite(loss):
        raise NanLoss(f"non-finite loss at epoch {epoch}, step {step}")


# ---------------------------------------------------------------------------
# LPS network
# ---------------------------------------------------------------------------


def _lps_epoch(model, opt, tokens, q_n, mask, idx, cfg, rng, epoch, train: bool):
    model.train(train)
    total, n = 0.0, 0
    for batch in _batches(len(idx), cfg.batch_size, rng):
        sel = idx[batch]
        tb = tokens[sel]
        pred_q, logits = model(tb)
        loss, _ = losses.lps_loss(
            pred_q, logits, q_n[sel], mask[sel], cfg.delta_lps, cfg.gamma, cfg.eta
        )
        _check_finite(loss, epoch, n)
        if train:
            opt.zero_grad()
            loss.backward()
            opt.step()
        total += float(loss.detach()) * len(batch)
        n += len(batch)
    return total / max(n, 1)


def lps_metrics(pred_q_db: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> dict:
    err = np.abs(pred_q_db - labels)[mask]
    denom = np.abs(labels)[mask]
    return {
        "qmae_db": float(np.mean(err)) if err.size else 0.0,
        "qmre_pct": float(np.mean(err / np.maximum(denom, 1e-9)) * 100.0) if err.size else 0.0,
    }


def fit_lps(dataset: str | Path, cfg: TrainConfig, out_weights: Optional[str | Path] = None) -> dict:
    cfg.validate()
    torch.manual_seed(cfg.seed)
    ds = D.load_lps(dataset)
    tr, va, te = D.split_indices(len(ds.features), cfg.seed, cfg.split)
    edges = D.lps_feature_edges(ds.features[tr], (cfg.dims or {}).get("d_model", 256))
    tokens_np = D.encode_lps_tokens(ds.features, edges).astype(np.float32)
    mu, sigma = _standardise(ds.quantiles[tr], ds.mask[tr])
    q_norm = ((ds.quantiles - mu) / sigma).astype(np.float32)

    tokens = torch.from_numpy(tokens_np)
    q_t = torch.from_numpy(q_norm)
    m_t = torch.from_numpy(ds.mask)

    model = LpsNet(dims=cfg.dims, dropout=cfg.dropout)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)

    folds = []
    if cfg.k_folds > 1:
        pool = np.concatenate([tr, va])
        for fi, (ftr, fva) in enumerate(D.kfold_indices(pool, cfg.k_folds, cfg.seed)):
            torch.manual_seed(cfg.seed + 1000 + fi)
            fm = LpsNet(dims=cfg.dims, dropout=cfg.dropout)
            fo = torch.optim.AdamW(fm.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
            frng = np.random.default_rng(cfg.seed + fi)
            for ep in range(cfg.epochs):
                _lps_epoch(fm, fo, tokens, q_t, m_t, ftr, cfg, frng, ep, True)
            with torch.no_grad():
                val = _lps_epoch(fm, fo, tokens, q_t, m_t, fva, cfg, frng, cfg.epochs, False)
            folds.append(val)

    history = []
    for ep in range(cfg.epochs):
        history.append(_lps_epoch(model, opt, tokens, q_t, m_t, tr, cfg, rng, ep, True))

    model.eval()
    for head in (model.head_direct, model.head_link, model.head_noise):
        fold_output_scale(head, mu, sigma)
    with torch.no_grad():
        t0 = time.perf_counter()
        pred_q, logits = model(tokens[te])
        infer_ms = (time.perf_counter() - t0) * 1e3 / max(len(te), 1)
    metrics = lps_metrics(pred_q.numpy(), ds.quantiles[te], ds.mask[te])
    mask_acc = float(
        ((logits.numpy() >= 0.0) == ds.mask[te]).mean()
    )

    report = {
        "kind": "lps",
        "n_records": len(ds.features),
        "n_params": count_params(model),
        "initial_loss": history[0],
        "final_loss": history[-1],
        "loss_history": history,
        "mask_accuracy": mask_acc,
        "infer_ms": infer_ms,
        "label_mu": mu,
        "label_sigma": sigma,
        **metrics,
    }
    if folds:
        report["fold_val_losses"] = folds
    if out_weights is not None:
        nckm.save(export.export_lps(model, edges), out_weights)
        report["weights"] = str(out_weights)
    return report


# ---------------------------------------------------------------------------
# SE network
# ---------------------------------------------------------------------------


def _se_epoch(model, opt, tokens, cats, labels, idx, cfg, rng, epoch, train: bool):
    model.train(train)
    total, n = 0.0, 0
    for batch in _batches(len(idx), cfg.batch_size, rng):
        sel = idx[batch]
        pred = model(tokens[sel], cats[sel])
        loss = losses.se_loss(pred, labels[sel], cfg.delta_se)
        _check_finite(loss, epoch, n)
        if train:
            opt.zero_grad()
            loss.backward()
            opt.step()
        total += float(loss.detach()) * len(batch)
        n += len(batch)
    return total / max(n, 1)


def se_metrics(pred: np.ndarray, labels: np.ndarray) -> dict:
    err = np.abs(pred - labels)
    return {
        "mae": float(np.mean(err)),
        "mre_pct": float(np.mean(err / np.maximum(np.abs(labels), 1e-9)) * 100.0),
    }


def fit_se(dataset: str | Path, cfg: TrainConfig, out_weights: Optional[str | Path] = None) -> dict:
    cfg.validate()
    torch.manual_seed(cfg.seed)
    ds = D.load_se(dataset)
    tr, va, te = D.split_indices(len(ds.labels), cfg.seed, cfg.split)
    edges = D.se_scalar_edges(ds.cdfs[tr], n_bins=(cfg.dims or {}).get("d_model", 256) // 16)
    tokens_np = D.encode_se_tokens(ds.cdfs, edges[0]).astype(np.float32)
    mu, sigma = _standardise(ds.labels[tr])
    y_norm = ((ds.labels - mu) / sigma).astype(np.float32)

    tokens = torch.from_numpy(tokens_np)
    cats = torch.from_numpy(ds.cats.astype(np.int64))
    y_t = torch.from_numpy(y_norm)

    model = SeNet(dims=cfg.dims, dropout=cfg.dropout)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)

    folds = []
    if cfg.k_folds > 1:
        pool = np.concatenate([tr, va])
        for fi, (ftr, fva) in enumerate(D.kfold_indices(pool, cfg.k_folds, cfg.seed)):
            torch.manual_seed(cfg.seed + 2000 + fi)
            fm = SeNet(dims=cfg.dims, dropout=cfg.dropout)
            fo = torch.optim.AdamW(fm.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
            frng = np.random.default_rng(cfg.seed + fi)
            for ep in range(cfg.epochs):
                _se_epoch(fm, fo, tokens, cats, y_t, ftr, cfg, frng, ep, True)
            with torch.no_grad():
                folds.append(_se_epoch(fm, fo, tokens, cats, y_t, fva, cfg, frng, cfg.epochs, False))

    history = []
    for ep in range(cfg.epochs):
        history.append(_se_epoch(model, opt, tokens, cats, y_t, tr, cfg, rng, ep, True))

    model.eval()
    fold_output_scale(model.head, mu, sigma)
    with torch.no_grad():
        t0 = time.perf_counter()
        pred = model(tokens[te], cats[te]).numpy()
        infer_ms = (time.perf_counter() - t0) * 1e3 / max(len(te), 1)
    metrics = se_metrics(pred, ds.labels[te])

    report = {
        "kind": "se",
        "n_records": len(ds.labels),
        "n_params": count_params(model),
        "initial_loss": history[0],
        "final_loss": history[-1],
        "loss_history": history,
        "infer_ms": infer_ms,
        "label_mu": mu,
        "label_sigma": sigma,
        "test_indices": te.tolist(),
        **metrics,
    }
    if folds:
        report["fold_val_losses"] = folds
    if out_weights is not None:
        nckm.save(export.export_se(model, edges), out_weights)
        report["weights"] = str(out_weights)
    return report


def write_metrics(report: dict, path: str | Path) -> None:
    keys = ("qmae_db", "qmre_pct", "mae", "mre_pct", "n_params", "infer_ms")
    obj = {k: report[k] for k in keys if k in report}
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
