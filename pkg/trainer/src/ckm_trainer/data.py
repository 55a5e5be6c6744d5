"""JSONL dataset ingestion, piecewise-linear encoding, and split helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_FEATURES = 15
SENTINEL_DB = -300.0


@dataclass
class LpsData:
    features: np.ndarray  # (N, 15)
    quantiles: np.ndarray  # (N, 48)
    mask: np.ndarray  # (N, 48) bool


@dataclass
class SeData:
    cdfs: np.ndarray  # (N, M, 16), canonically ordered
    cats: np.ndarray  # (N, M) int
    labels: np.ndarray  # (N,)


def load_lps(path: str | Path) -> LpsData:
    feats, qs, ms = [], [], []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            feats.append(obj["features"])
            qs.append(obj["cdf_direct"] + obj["cdf_link"] + obj["cdf_noise"])
            ms.append(obj["mask"])
    if not feats:
        raise ValueError(f"empty dataset {path}")
    data = LpsData(
        features=np.asarray(feats, dtype=float),
        quantiles=np.asarray(qs, dtype=float),
        mask=np.asarray(ms, dtype=bool),
    )
    if data.features.shape[1] != N_FEATURES or data.quantiles.shape[1] != 48:
        raise ValueError("dataset schema mismatch: expected 15 features and 48 quantiles")
    return data


def canonical_order(cdfs: np.ndarray, cats: np.ndarray) -> np.ndarray:
    """Sort indices by (category, quantile values); same rule as the inference engine."""
    keys = [(int(cats[i]), tuple(cdfs[i])) for i in range(len(cats))]
    return np.array(sorted(range(len(keys)), key=lambda i: keys[i]), dtype=int)


def load_se(path: str | Path) -> SeData:
    cdfs, cats, labels = [], [], []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            q = np.asarray(obj["cdfs"], dtype=float)
            c = np.asarray(obj["cats"], dtype=int)
            order = canonical_order(q, c)
            cdfs.append(q[order])
            cats.append(c[order])
            labels.append(float(obj["se"]))
    if not cdfs:
        raise ValueError(f"empty dataset {path}")
    m = {c.shape[0] for c in cats}
    if len(m) != 1:
        raise ValueError("dataset schema mismatch: varying CDF counts per record")
    return SeData(
        cdfs=np.stack(cdfs), cats=np.stack(cats), labels=np.asarray(labels, dtype=float)
    )


def compute_ple_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Strictly increasing empirical-quantile bin edges (n_bins + 1 of them)."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size == 0 or np.ptp(v) == 0.0:
        center = float(v[0]) if v.size else 0.0
        return np.linspace(center - 1.0, center + 1.0, n_bins + 1)
    edges = np.quantile(v, np.linspace(0.0, 1.0, n_bins + 1))
    step = max(1e-9, 1e-9 * float(np.ptp(v)))
    for i in range(1, edges.size):
        if edges[i] <= edges[i - 1]:
            edges[i] = edges[i - 1] + step
    return edges


def ple_encode_array(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """(..., ) values -> (..., T) encodings; float64 to match the inference engine."""
    e = np.asarray(edges, dtype=float)
    t = (x[..., None] - e[:-1]) / np.diff(e)
    return np.clip(t, 0.0, 1.0)


def lps_feature_edges(features: np.ndarray, d_model: int) -> list[np.ndarray]:
    return [compute_ple_edges(features[:, j], d_model) for j in range(features.shape[1])]


def se_scalar_edges(cdfs: np.ndarray, n_bins: int = 16) -> list[np.ndarray]:
    vals = cdfs.ravel()
    return [compute_ple_edges(vals[vals > SENTINEL_DB + 1.0], n_bins)]


def encode_lps_tokens(features: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    """(N, 15) -> (N, 15, d_model) feature tokens."""
    cols = [ple_encode_array(features[:, j], edges[j]) for j in range(features.shape[1])]
    return np.stack(cols, axis=1)


def encode_se_tokens(cdfs: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """(N, M, 16) -> (N, M, 16 * T) CDF tokens (concatenated per-scalar encodings)."""
    enc = ple_encode_array(cdfs, edges)  # (N, M, 16, T)
    n, m = cdfs.shape[:2]
    return enc.reshape(n, m, -1)


def split_indices(n: int, seed: int, ratios=(0.8, 0.1, 0.1)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic train/val/test permutation split."""
    assert abs(sum(ratios) - 1.0) < 1e-9
    perm = np.random.default_rng(seed).permutation(n)
    n_tr = int(round(ratios[0] * n))
    n_va = int(round(ratios[1] * n))
    return perm[:n_tr], perm[n_tr : n_tr + n_va], perm[n_tr + n_va :]


def kfold_indices(idx: np.ndarray, k: int, seed: int):
    """Yield (train, val) index pairs over k folds of the given index set."""
    perm = np.random.default_rng(seed).permutation(idx)
    folds = np.array_split(perm, k)
    for i in range(k):
        val = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        yield train, val
