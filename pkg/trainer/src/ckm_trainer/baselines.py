"""Reference architectures: a plain MLP for the link-statistics task and an
LSTM for SE regression.  Hyperparameter grids are fixed here so baseline
numbers are reproducible rather than hand-tuned per run.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import data as D
from . import losses
from .models import count_params
from .train import TrainConfig, _batches, _standardise, lps_metrics, se_metrics

MLP_GRID = [(256, 256), (512, 512)]
LSTM_GRID = [64, 128]


class MlpLps(nn.Module):
    def __init__(self, hidden: tuple[int, ...]):
        super().__init__()
        layers: list[nn.Module] = []
        d = 15
        for h in hidden:
            layers += [nn.Linear(d, h), nn.GELU()]
            d = h
        self.body = nn.Sequential(*layers)
        self.q_out = nn.Linear(d, 48)
        self.m_out = nn.Linear(d, 48)

    def forward(self, x):
        h = self.body(x)
        return self.q_out(h), self.m_out(h)


class LstmSe(nn.Module):
    def __init__(self, hidden: int):
        super().__init__()
        self.embed = nn.Linear(16 + 4, hidden)
        self.lstm = nn.LSTM(hidden, hidden, batch_first=True)
        self.out = nn.Linear(hidden, 1)

    def forward(self, cdfs, cats_onehot):
        x = self.embed(torch.cat([cdfs, cats_onehot], dim=-1))
        _, (h, _) = self.lstm(x)
        return self.out(h[-1]).squeeze(-1)


def baseline_mlp_lps(dataset: str | Path, cfg: TrainConfig) -> dict:
    ds = D.load_lps(dataset)
    tr, va, te = D.split_indices(len(ds.features), cfg.seed, cfg.split)
    f_mu = ds.features[tr].mean(axis=0)
    f_sd = np.maximum(ds.features[tr].std(axis=0), 1e-6)
    feats = ((ds.features - f_mu) / f_sd).astype(np.float32)
    mu, sigma = _standardise(ds.quantiles[tr], ds.mask[tr])
    q_norm = ((ds.quantiles - mu) / sigma).astype(np.float32)

    x = torch.from_numpy(feats)
    q_t = torch.from_numpy(q_norm)
    m_t = torch.from_numpy(ds.mask)

    best = None
    for hidden in MLP_GRID:
        torch.manual_seed(cfg.seed)
        model = MlpLps(hidden)
        opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
        rng = np.random.default_rng(cfg.seed)
        hist = []
        for ep in range(cfg.epochs):
            model.train()
            tot, n = 0.0, 0
            for batch in _batches(len(tr), cfg.batch_size, rng):
                sel = tr[batch]
                pq, lg = model(x[sel])
                loss, _ = losses.lps_loss(pq, lg, q_t[sel], m_t[sel], cfg.delta_lps, cfg.gamma, cfg.eta)
                opt.zero_grad()
                loss.backward()
                opt.step()
                tot += float(loss.detach()) * len(batch)
                n += len(batch)
            hist.append(tot / n)
        model.eval()
        with torch.no_grad():
            pq, lg = model(x[va])
            val, _ = losses.lps_loss(pq, lg, q_t[va], m_t[va], cfg.delta_lps, cfg.gamma, cfg.eta)
        if best is None or float(val) < best[0]:
            best = (float(val), hidden, model, hist)

    _, hidden, model, hist = best
    with torch.no_grad():
        t0 = time.perf_counter()
        pq, _ = model(x[te])
        infer_ms = (time.perf_counter() - t0) * 1e3 / max(len(te), 1)
    pred_db = pq.numpy() * sigma + mu
    return {
        "kind": "baseline-mlp-lps",
        "hidden": list(hidden),
        "n_params": count_params(model),
        "initial_loss": hist[0],
        "final_loss": hist[-1],
        "infer_ms": infer_ms,
        **lps_metrics(pred_db, ds.quantiles[te], ds.mask[te]),
    }


def baseline_lstm_se(dataset: str | Path, cfg: TrainConfig) -> dict:
    ds = D.load_se(dataset)
    tr, va, te = D.split_indices(len(ds.labels), cfg.seed, cfg.split)
    vals = ds.cdfs[tr].ravel()
    q_mu = float(vals[vals > D.SENTINEL_DB + 1.0].mean())
    q_sd = float(max(vals[vals > D.SENTINEL_DB + 1.0].std(), 1e-6))
    cdfs = np.clip((ds.cdfs - q_mu) / q_sd, -6.0, 6.0).astype(np.float32)
    onehot = np.eye(4, dtype=np.float32)[ds.cats - 1]
    mu, sigma = _standardise(ds.labels[tr])
    y_norm = ((ds.labels - mu) / sigma).astype(np.float32)

    xq = torch.from_numpy(cdfs)
    xc = torch.from_numpy(onehot)
    y_t = torch.from_numpy(y_norm)

    best = None
    for hidden in LSTM_GRID:
        torch.manual_seed(cfg.seed)
        model = LstmSe(hidden)
        opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
        rng = np.random.default_rng(cfg.seed)
        hist = []
        for ep in range(cfg.epochs):
            model.train()
            tot, n = 0.0, 0
            for batch in _batches(len(tr), cfg.batch_size, rng):
                sel = tr[batch]
                loss = losses.se_loss(model(xq[sel], xc[sel]), y_t[sel], cfg.delta_se)
                opt.zero_grad()
                loss.backward()
                opt.step()
                tot += float(loss.detach()) * len(batch)
                n += len(batch)
            hist.append(tot / n)
        model.eval()
        with torch.no_grad():
            val = losses.se_loss(model(xq[va], xc[va]), y_t[va], cfg.delta_se)
        if best is None or float(val) < best[0]:
            best = (float(val), hidden, model, hist)

    _, hidden, model, hist = best
    with torch.no_grad():
        t0 = time.perf_counter()
        pred = model(xq[te], xc[te]).numpy() * sigma + mu
        infer_ms = (time.perf_counter() - t0) * 1e3 / max(len(te), 1)
    return {
        "kind": "baseline-lstm-se",
        "hidden": hidden,
        "n_params": count_params(model),
        "initial_loss": hist[0],
        "final_loss": hist[-1],
        "infer_ms": infer_ms,
        **se_metrics(pred, ds.labels[te]),
    }
