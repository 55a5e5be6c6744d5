"""Inference engine for the learned channel-knowledge maps.

Two Transformer-encoder models share one weight container:

* the link-statistics network maps 15 scalar features (UE position, BS
  power, one panel's parameter block) to 48 quantile values plus a 48-wide
  validity-probability mask;
* the SE network maps a set of categorised quantile CDFs to a single
  spectral-efficiency value.

Scalars enter through piecewise-linear encoding (PLE) against per-feature
bin edges stored alongside the weights, so inference needs no dataset
access.  Blocks are pre-LN: x += MSA(LN(x)); x += MLP(LN(x)); a final LN
follows the last block.  All weights are plain named float32 tensors in a
small binary container (see ``save_weights``); linear layers are stored
input-major and applied as y = x @ w + b.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

MAGIC = b"NCKM"
FORMAT_VERSION = 1
LN_EPS = 1e-5

DEFAULT_DIMS = {"d_model": 256, "heads": 4, "layers": 4, "mlp_hidden": 512, "head_hidden": 64}

N_LPS_FEATURES = 15
N_TARGET_TOKENS = 48


class WeightsError(ValueError):
    """Raised for malformed weight files or incomplete weight sets."""


@dataclass
class WeightStore:
    """Named float32 tensors plus model metadata and PLE bin edges."""

    kind: str  # "lps" or "se"
    dims: dict
    ple_edges: list[np.ndarray]  # float64; lps: one per feature, se: one shared
    tensors: dict[str, np.ndarray]  # insertion order == file order

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise WeightsError(f"missing tensor {name!r}") from None

    def validate(self) -> None:
        if self.kind not in ("lps", "se"):
            raise WeightsError(f"unknown model kind {self.kind!r}")
        for name, shape in required_tensors(self.kind, self.dims).items():
            t = self.tensors.get(name)
            if t is None:
                raise WeightsError(f"missing tensor {name!r}")
            if tuple(t.shape) != shape:
                raise WeightsError(
                    f"tensor {name!r} has shape {tuple(t.shape)}, expected {shape}"
                )
        n_edges = N_LPS_FEATURES if self.kind == "lps" else 1
        if len(self.ple_edges) != n_edges:
            raise WeightsError(
                f"expected {n_edges} PLE edge arrays, got {len(self.ple_edges)}"
            )
        for i, e in enumerate(self.ple_edges):
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0.0):
                raise WeightsError(f"ple_edges[{i}]: edges must be strictly increasing")


def required_tensors(kind: str, dims: dict) -> dict[str, tuple[int, ...]]:
    d = dims["d_model"]
    hid = dims["mlp_hidden"]
    hh = dims["head_hidden"]
    req: dict[str, tuple[int, ...]] = {}
    for l in range(dims["layers"]):
        p = f"enc.{l}"
        req[f"{p}.ln1.g"] = (d,)
        req[f"{p}.ln1.b"] = (d,)
        for m in ("wq", "wk", "wv", "wo"):
            req[f"{p}.attn.{m}"] = (d, d)
        for m in ("bq", "bk", "bv", "bo"):
            req[f"{p}.attn.{m}"] = (d,)
        req[f"{p}.ln2.g"] = (d,)
        req[f"{p}.ln2.b"] = (d,)
        req[f"{p}.mlp.w1"] = (d, hid)
        req[f"{p}.mlp.b1"] = (hid,)
        req[f"{p}.mlp.w2"] = (hid, d)
        req[f"{p}.mlp.b2"] = (d,)
    req["enc.ln_f.g"] = (d,)
    req["enc.ln_f.b"] = (d,)

    def head(prefix: str) -> None:
        req[f"{prefix}.w1"] = (d, hh)
        req[f"{prefix}.b1"] = (hh,)
        req[f"{prefix}.w2"] = (hh, 1)
        req[f"{prefix}.b2"] = (1,)

    if kind == "lps":
        req["lps.target_tokens"] = (N_TARGET_TOKENS, d)
        req["lps.pos_embed"] = (N_TARGET_TOKENS + N_LPS_FEATURES, d)
        for g in ("direct", "link", "noise"):
            head(f"lps.head.{g}")
        head("lps.mask")
    elif kind == "se":
        req["se.target_token"] = (d,)
        req["se.target_pos"] = (d,)
        req["se.cat_embed"] = (4, d)
        head("se.head")
    else:
        raise WeightsError(f"unknown model kind {kind!r}")
    return req


# ---------------------------------------------------------------------------
# Primitive ops (float64 internally; weights upcast from float32 storage)
# ---------------------------------------------------------------------------


def ple_encode(x: float, edges: np.ndarray) -> np.ndarray:
    """Piecewise-linear encoding over T bins: component t saturates left of its bin."""
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two bin edges")
    if np.any(np.diff(e) <= 0.0):
        raise ValueError("bin edges must be strictly increasing")
    return np.clip((x - e[:-1]) / np.diff(e), 0.0, 1.0)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * g + b


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _f64(ws: WeightStore, name: str) -> np.ndarray:
    return ws.tensor(name).astype(np.float64)


def _attention(x: np.ndarray, ws: WeightStore, layer: int, heads: int) -> np.ndarray:
    n, d = x.shape
    dh = d // heads
    p = f"enc.{layer}.attn"
    q = x @ _f64(ws, f"{p}.wq") + _f64(ws, f"{p}.bq")
    k = x @ _f64(ws, f"{p}.wk") + _f64(ws, f"{p}.bk")
    v = x @ _f64(ws, f"{p}.wv") + _f64(ws, f"{p}.bv")
    q = q.reshape(n, heads, dh).transpose(1, 0, 2)
    k = k.reshape(n, heads, dh).transpose(1, 0, 2)
    v = v.reshape(n, heads, dh).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
    ctx = softmax(scores) @ v  # (heads, n, dh)
    merged = ctx.transpose(1, 0, 2).reshape(n, d)
    return merged @ _f64(ws, f"{p}.wo") + _f64(ws, f"{p}.bo")


def _mlp(x: np.ndarray, ws: WeightStore, layer: int) -> np.ndarray:
    p = f"enc.{layer}.mlp"
    h = gelu(x @ _f64(ws, f"{p}.w1") + _f64(ws, f"{p}.b1"))
    # dropout sites sit between/after the linears during training; identity here
    return h @ _f64(ws, f"{p}.w2") + _f64(ws, f"{p}.b2")


def encoder_forward(tokens: np.ndarray, ws: WeightStore) -> np.ndarray:
    """Pre-LN encoder over (N, d_model) tokens, final LN included."""
    ws.validate()
    x = np.asarray(tokens, dtype=float)
    d = ws.dims["d_model"]
    if x.ndim != 2 or x.shape[1] != d:
        raise WeightsError(f"tokens: expected (N, {d}), got {x.shape}")
    heads = ws.dims["heads"]
    for l in range(ws.dims["layers"]):
        x = x + _attention(layer_norm(x, _f64(ws, f"enc.{l}.ln1.g"), _f64(ws, f"enc.{l}.ln1.b")), ws, l, heads)
        x = x + _mlp(layer_norm(x, _f64(ws, f"enc.{l}.ln2.g"), _f64(ws, f"enc.{l}.ln2.b")), ws, l)
    return layer_norm(x, _f64(ws, "enc.ln_f.g"), _f64(ws, "enc.ln_f.b"))


def _head(tokens: np.ndarray, ws: WeightStore, prefix: str) -> np.ndarray:
    h = gelu(tokens @ _f64(ws, f"{prefix}.w1") + _f64(ws, f"{prefix}.b1"))
    return (h @ _f64(ws, f"{prefix}.w2") + _f64(ws, f"{prefix}.b2")).ravel()


@dataclass(frozen=True)
class LpsOutput:
    """48 quantiles in dB (direct 0-15, link 16-31, noise 32-47) plus mask probabilities."""

    quantiles48: np.ndarray
    mask_prob48: np.ndarray


def lps_forward(features: Sequence[float], ws: WeightStore) -> LpsOutput:
    f = np.asarray(features, dtype=float).ravel()
    if f.size != N_LPS_FEATURES:
        raise ValueError(f"expected {N_LPS_FEATURES} features, got {f.size}")
    ws.validate()
    if ws.kind != "lps":
        raise WeightsError("weight store is not a link-statistics model")
    d = ws.dims["d_model"]
    feat_tokens = np.stack([ple_encode(float(v), ws.ple_edges[l]) for l, v in enumerate(f)])
    if feat_tokens.shape[1] != d:
        raise WeightsError(
            f"PLE edges produce {feat_tokens.shape[1]}-dim tokens, model wants {d}"
        )
    x = np.concatenate([_f64(ws, "lps.target_tokens"), feat_tokens], axis=0)
    x = x + _f64(ws, "lps.pos_embed")
    y = encoder_forward(x, ws)
    quant = np.concatenate(
        [
            _head(y[0:16], ws, "lps.head.direct"),
            _head(y[16:32], ws, "lps.head.link"),
            _head(y[32:48], ws, "lps.head.noise"),
        ]
    )
    logits = _head(y[0:48], ws, "lps.mask")
    mask_prob = 1.0 / (1.0 + np.exp(-logits))
    return LpsOutput(quantiles48=quant, mask_prob48=mask_prob)


def canonical_cdf_order(cdfs: np.ndarray, cats: Sequence[int]) -> np.ndarray:
    """Stable canonical ordering: by category, then lexicographic quantile values.

    The SE model is defined on a multiset of CDFs; ordering inputs before the
    encoder makes same-category permutation invariance exact.
    """
    keys = [(int(cats[i]), tuple(cdfs[i])) for i in range(len(cats))]
    return np.array(sorted(range(len(keys)), key=lambda i: keys[i]), dtype=int)


def se_forward(cdfs: np.ndarray, cats: Sequence[int], ws: WeightStore) -> float:
    """SE prediction from (M, 16) quantile values and their category indices."""
    ws.validate()
    if ws.kind != "se":
        raise WeightsError("weight store is not an SE model")
    q = np.asarray(cdfs, dtype=float)
    if q.ndim != 2 or q.shape[1] != 16:
        raise ValueError(f"cdfs: expected (M, 16), got {q.shape}")
    cats = [int(c) for c in cats]
    if len(cats) != q.shape[0]:
        raise ValueError("cats length must match cdfs")
    if any(c not in (1, 2, 3, 4) for c in cats):
        raise ValueError("categories must be in 1..4")
    if cats.count(1) != 1:
        raise ValueError("missing direct-link CDF")
    if cats.count(2) > 1:
        raise ValueError("at most one cascaded-signal CDF allowed")
    order = canonical_cdf_order(q, cats)
    q = q[order]
    cats = [cats[i] for i in order]

    edges = ws.ple_edges[0]
    per_scalar = edges.size - 1
    d = ws.dims["d_model"]
    if per_scalar * 16 != d:
        raise WeightsError(
            f"PLE edges produce {per_scalar * 16}-dim CDF tokens, model wants {d}"
        )
    cat_embed = _f64(ws, "se.cat_embed")
    tokens = np.empty((q.shape[0] + 1, d))
    tokens[0] = _f64(ws, "se.target_token") + _f64(ws, "se.target_pos")
    for m in range(q.shape[0]):
        enc = np.concatenate([ple_encode(float(v), edges) for v in q[m]])
        tokens[m + 1] = enc + cat_embed[cats[m] - 1]
    y = encoder_forward(tokens, ws)
    return float(_head(y[0:1], ws, "se.head")[0])


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def smooth_l1(err, delta: float):
    e = np.abs(np.asarray(err, dtype=float))
    return np.where(e < delta, 0.5 * e**2 / delta, e - 0.5 * delta)


@dataclass(frozen=True)
class LpsLossParts:
    total: float
    smooth: float
    slope: float
    bce: float


def lps_loss(
    pred: LpsOutput,
    label_quantiles48: np.ndarray,
    label_mask48: np.ndarray,
    delta: float = 0.5,
    gamma: float = 0.2,
    eta: float = 20.0,
) -> LpsLossParts:
    """Masked smooth-L1 on quantiles + slope MAE within each CDF + mask BCE."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    q = np.asarray(label_quantiles48, dtype=float)
    m = np.asarray(label_mask48, dtype=bool)
    err = pred.quantiles48 - q
    smooth = float(np.mean(smooth_l1(err[m], delta))) if m.any() else 0.0

    slopes = []
    for g in range(3):
        s = slice(16 * g, 16 * (g + 1))
        qm, qp, ql = m[s], pred.quantiles48[s], q[s]
        for k in range(15):
            if qm[k] and qm[k + 1]:
                slopes.append(abs((qp[k + 1] - qp[k]) - (ql[k + 1] - ql[k])))
    slope = float(np.mean(slopes)) if slopes else 0.0

    p = np.clip(pred.mask_prob48, 1e-7, 1.0 - 1e-7)
    y = m.astype(float)
    bce = float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
    return LpsLossParts(
        total=smooth + gamma * slope + eta * bce, smooth=smooth, slope=slope, bce=bce
    )


def se_loss(pred: float, label: float, delta: float = 1.0) -> float:
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    return float(smooth_l1(pred - label, delta))


# ---------------------------------------------------------------------------
# Weight container I/O
# ---------------------------------------------------------------------------


def save_weights(ws: WeightStore, path: str | Path) -> None:
    """Container layout: magic | u32 version | u64 header length | JSON manifest | f32 data."""
    ws.validate()
    entries = []
    offset = 0
    blobs = []
    for name, t in ws.tensors.items():
        arr = np.ascontiguousarray(t, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "kind": ws.kind,
        "dims": ws.dims,
        "ple_edges": [[float(v) for v in e] for e in ws.ple_edges],
        "tensors": entries,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)


def load_weights(path: str | Path) -> WeightStore:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise WeightsError("bad magic")
    if len(data) < 16:
        raise WeightsError("truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise WeightsError(f"unsupported version {version}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    if len(data) < 16 + hlen:
        raise WeightsError("truncated header")
    try:
        manifest = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightsError(f"corrupt manifest: {e}") from e
    body = data[16 + hlen :]
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        end = start + 4 * count
        if end > len(body):
            raise WeightsError(f"truncated tensor {entry['name']!r}")
        arr = np.frombuffer(body[start:end], dtype="<f4").reshape(shape)
        tensors[entry["name"]] = arr.copy()
    ws = WeightStore(
        kind=manifest["kind"],
        dims=manifest["dims"],
        ple_edges=[np.asarray(e, dtype=float) for e in manifest["ple_edges"]],
        tensors=tensors,
    )
    ws.validate()
    return ws


# ---------------------------------------------------------------------------
# Seeded initialisation (random weights for tests and as a training start)
# ---------------------------------------------------------------------------


def default_lps_edges() -> list[np.ndarray]:
    return [np.linspace(-200.0, 200.0, DEFAULT_DIMS["d_model"] + 1) for _ in range(N_LPS_FEATURES)]


def default_se_edges() -> list[np.ndarray]:
    return [np.linspace(-310.0, 0.0, 17)]


def init_weights(
    kind: str,
    seed: int,
    ple_edges: Optional[list[np.ndarray]] = None,
    dims: Optional[dict] = None,
    scale: float = 0.02,
) -> WeightStore:
    """Seeded random weight store: N(0, scale) matrices, zero biases, identity LN."""
    dims = dict(DEFAULT_DIMS if dims is None else dims)
    if ple_edges is None:
        ple_edges = default_lps_edges() if kind == "lps" else default_se_edges()
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in required_tensors(kind, dims).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("g",):
            t = np.ones(shape, dtype=np.float32)
        elif leaf in ("b", "bq", "bk", "bv", "bo", "b1", "b2"):
            t = np.zeros(shape, dtype=np.float32)
        else:
            t = rng.normal(0.0, scale, size=shape).astype(np.float32)
        tensors[name] = t
    ws = WeightStore(kind=kind, dims=dims, ple_edges=list(ple_edges), tensors=tensors)
    ws.validate()
    return ws
