"""Mapping between the torch modules and the NCKM tensor layout.

NCKM stores linear weights input-major (y = x @ w + b); torch Linear keeps
(out, in), so weights are transposed on the way through.
"""

from __future__ import annotations

import numpy as np
import torch

from .models import Encoder, Head, LpsNet, SeNet
from .nckm import NckmFile


def _lin(t: torch.nn.Linear) -> tuple[np.ndarray, np.ndarray]:
    w = t.weight.detach().cpu().numpy().T.astype(np.float32)
    b = t.bias.detach().cpu().numpy().astype(np.float32)
    return w, b


def _put_lin(out: dict, prefix: str, lin: torch.nn.Linear, wname: str, bname: str) -> None:
    w, b = _lin(lin)
    out[f"{prefix}.{wname}"] = w
    out[f"{prefix}.{bname}"] = b


def _encoder_tensors(enc: Encoder) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for l, blk in enumerate(enc.blocks):
        p = f"enc.{l}"
        out[f"{p}.ln1.g"] = blk.ln1.weight.detach().cpu().numpy().astype(np.float32)
        out[f"{p}.ln1.b"] = blk.ln1.bias.detach().cpu().numpy().astype(np.float32)
        _put_lin(out, f"{p}.attn", blk.attn.q, "wq", "bq")
        _put_lin(out, f"{p}.attn", blk.attn.k, "wk", "bk")
        _put_lin(out, f"{p}.attn", blk.attn.v, "wv", "bv")
        _put_lin(out, f"{p}.attn", blk.attn.o, "wo", "bo")
        out[f"{p}.ln2.g"] = blk.ln2.weight.detach().cpu().numpy().astype(np.float32)
        out[f"{p}.ln2.b"] = blk.ln2.bias.detach().cpu().numpy().astype(np.float32)
        _put_lin(out, f"{p}.mlp", blk.fc1, "w1", "b1")
        _put_lin(out, f"{p}.mlp", blk.fc2, "w2", "b2")
    out["enc.ln_f.g"] = enc.ln_f.weight.detach().cpu().numpy().astype(np.float32)
    out["enc.ln_f.b"] = enc.ln_f.bias.detach().cpu().numpy().astype(np.float32)
    return out


def _head_tensors(prefix: str, head: Head) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    _put_lin(out, prefix, head.fc1, "w1", "b1")
    _put_lin(out, prefix, head.fc2, "w2", "b2")
    return out


def export_lps(model: LpsNet, ple_edges: list[np.ndarray]) -> NckmFile:
    tensors = _encoder_tensors(model.encoder)
    tensors["lps.target_tokens"] = model.target_tokens.detach().cpu().numpy().astype(np.float32)
    tensors["lps.pos_embed"] = model.pos_embed.detach().cpu().numpy().astype(np.float32)
    tensors.update(_head_tensors("lps.head.direct", model.head_direct))
    tensors.update(_head_tensors("lps.head.link", model.head_link))
    tensors.update(_head_tensors("lps.head.noise", model.head_noise))
    tensors.update(_head_tensors("lps.mask", model.head_mask))
    return NckmFile(kind="lps", dims=dict(model.dims), ple_edges=list(ple_edges), tensors=tensors)


def export_se(model: SeNet, ple_edges: list[np.ndarray]) -> NckmFile:
    tensors = _encoder_tensors(model.encoder)
    tensors["se.target_token"] = model.target_token.detach().cpu().numpy().astype(np.float32)
    tensors["se.target_pos"] = model.target_pos.detach().cpu().numpy().astype(np.float32)
    tensors["se.cat_embed"] = model.cat_embed.detach().cpu().numpy().astype(np.float32)
    tensors.update(_head_tensors("se.head", model.head))
    return NckmFile(kind="se", dims=dict(model.dims), ple_edges=list(ple_edges), tensors=tensors)


def _load_lin(lin: torch.nn.Linear, f: NckmFile, prefix: str, wname: str, bname: str) -> None:
    with torch.no_grad():
        lin.weight.copy_(torch.from_numpy(f.tensors[f"{prefix}.{wname}"].T.copy()))
        lin.bias.copy_(torch.from_numpy(f.tensors[f"{prefix}.{bname}"].copy()))


def _load_encoder(enc: Encoder, f: NckmFile) -> None:
    with torch.no_grad():
        for l, blk in enumerate(enc.blocks):
            p = f"enc.{l}"
            blk.ln1.weight.copy_(torch.from_numpy(f.tensors[f"{p}.ln1.g"].copy()))
            blk.ln1.bias.copy_(torch.from_numpy(f.tensors[f"{p}.ln1.b"].copy()))
            _load_lin(blk.attn.q, f, f"{p}.attn", "wq", "bq")
            _load_lin(blk.attn.k, f, f"{p}.attn", "wk", "bk")
            _load_lin(blk.attn.v, f, f"{p}.attn", "wv", "bv")
            _load_lin(blk.attn.o, f, f"{p}.attn", "wo", "bo")
            blk.ln2.weight.copy_(torch.from_numpy(f.tensors[f"{p}.ln2.g"].copy()))
            blk.ln2.bias.copy_(torch.from_numpy(f.tensors[f"{p}.ln2.b"].copy()))
            _load_lin(blk.fc1, f, f"{p}.mlp", "w1", "b1")
            _load_lin(blk.fc2, f, f"{p}.mlp", "w2", "b2")
        enc.ln_f.weight.copy_(torch.from_numpy(f.tensors["enc.ln_f.g"].copy()))
        enc.ln_f.bias.copy_(torch.from_numpy(f.tensors["enc.ln_f.b"].copy()))


def load_lps(f: NckmFile) -> LpsNet:
    model = LpsNet(dims=f.dims)
    _load_encoder(model.encoder, f)
    with torch.no_grad():
        model.target_tokens.copy_(torch.from_numpy(f.tensors["lps.target_tokens"].copy()))
        model.pos_embed.copy_(torch.from_numpy(f.tensors["lps.pos_embed"].copy()))
    for name, head in (
        ("lps.head.direct", model.head_direct),
        ("lps.head.link", model.head_link),
        ("lps.head.noise", model.head_noise),
        ("lps.mask", model.head_mask),
    ):
        _load_lin(head.fc1, f, name, "w1", "b1")
        _load_lin(head.fc2, f, name, "w2", "b2")
    return model.eval()


def load_se(f: NckmFile) -> SeNet:
    model = SeNet(dims=f.dims)
    _load_encoder(model.encoder, f)
    with torch.no_grad():
        model.target_token.copy_(torch.from_numpy(f.tensors["se.target_token"].copy()))
        model.target_pos.copy_(torch.from_numpy(f.tensors["se.target_pos"].copy()))
        model.cat_embed.copy_(torch.from_numpy(f.tensors["se.cat_embed"].copy()))
    _load_lin(model.head.fc1, f, "se.head", "w1", "b1")
    _load_lin(model.head.fc2, f, "se.head", "w2", "b2")
    return model.eval()
