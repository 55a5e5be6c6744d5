"""Torch modules mirroring the inference engine's forward definition.

Pre-LN blocks (x += MSA(LN(x)); x += MLP(LN(x))), exact-erf GELU, 4 heads,
MLP with two linears and two dropouts, final LN after the last block.
Dropout is active only in training mode.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

DEFAULT_DIMS = {"d_model": 256, "heads": 4, "layers": 4, "mlp_hidden": 512, "head_hidden": 64}
N_TARGET_TOKENS = 48
N_FEATURES = 15


class SelfAttention(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.heads = heads
        self.dh = d // heads
        self.q = nn.Linear(d, d)
        self.k = nn.Linear(d, d)
        self.v = nn.Linear(d, d)
        self.o = nn.Linear(d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        q = self.q(x).view(b, n, self.heads, self.dh).transpose(1, 2)
        k = self.k(x).view(b, n, self.heads, self.dh).transpose(1, 2)
        v = self.v(x).view(b, n, self.heads, self.dh).transpose(1, 2)
        att = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.dh), dim=-1)
        ctx = (att @ v).transpose(1, 2).reshape(b, n, d)
        return self.o(ctx)


class Block(nn.Module):
    def __init__(self, d: int, heads: int, hidden: int, dropout: float):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.attn = SelfAttention(d, heads)
        self.ln2 = nn.LayerNorm(d)
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)
        self.act = nn.GELU()
        self.drop1 = nn.Dropout(dropout)
        self.drop2 = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        h = self.drop1(self.act(self.fc1(self.ln2(x))))
        return x + self.drop2(self.fc2(h))


class Encoder(nn.Module):
    def __init__(self, dims: dict, dropout: float):
        super().__init__()
        self.blocks = nn.ModuleList(
            Block(dims["d_model"], dims["heads"], dims["mlp_hidden"], dropout)
            for _ in range(dims["layers"])
        )
        self.ln_f = nn.LayerNorm(dims["d_model"])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for blk in self.blocks:
            x = blk(x)
        return self.ln_f(x)


class Head(nn.Module):
    def __init__(self, d: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, 1)
        self.act = nn.GELU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x))).squeeze(-1)


class LpsNet(nn.Module):
    """48 target tokens + 15 PLE feature tokens -> 48 quantiles + 48 mask logits."""

    def __init__(self, dims: dict | None = None, dropout: float = 0.1):
        super().__init__()
        self.dims = dict(DEFAULT_DIMS if dims is None else dims)
        d = self.dims["d_model"]
        self.target_tokens = nn.Parameter(torch.randn(N_TARGET_TOKENS, d) * 0.02)
        self.pos_embed = nn.Parameter(torch.randn(N_TARGET_TOKENS + N_FEATURES, d) * 0.02)
        self.encoder = Encoder(self.dims, dropout)
        hh = self.dims["head_hidden"]
        self.head_direct = Head(d, hh)
        self.head_link = Head(d, hh)
        self.head_noise = Head(d, hh)
        self.head_mask = Head(d, hh)

    def forward(self, feat_tokens: torch.Tensor):
        """feat_tokens: (B, 15, d) PLE-encoded features."""
        b = feat_tokens.shape[0]
        x = torch.cat(
            [self.target_tokens.expand(b, -1, -1), feat_tokens], dim=1
        ) + self.pos_embed
        y = self.encoder(x)
        quant = torch.cat(
            [
                self.head_direct(y[:, 0:16]),
                self.head_link(y[:, 16:32]),
                self.head_noise(y[:, 32:48]),
            ],
            dim=1,
        )
        mask_logits = self.head_mask(y[:, 0:48])
        return quant, mask_logits


class SeNet(nn.Module):
    """Target token + categorised CDF tokens -> scalar SE."""

    def __init__(self, dims: dict | None = None, dropout: float = 0.1):
        super().__init__()
        self.dims = dict(DEFAULT_DIMS if dims is None else dims)
        d = self.dims["d_model"]
        self.target_token = nn.Parameter(torch.randn(d) * 0.02)
        self.target_pos = nn.Parameter(torch.randn(d) * 0.02)
        self.cat_embed = nn.Parameter(torch.randn(4, d) * 0.02)
        self.encoder = Encoder(self.dims, dropout)
        self.head = Head(d, self.dims["head_hidden"])

    def forward(self, cdf_tokens: torch.Tensor, cats: torch.Tensor) -> torch.Tensor:
        """cdf_tokens: (B, M, d) PLE-encoded CDFs; cats: (B, M) in 1..4."""
        b = cdf_tokens.shape[0]
        tokens = cdf_tokens + self.cat_embed[cats - 1]
        target = (self.target_token + self.target_pos).expand(b, 1, -1)
        y = self.encoder(torch.cat([target, tokens], dim=1))
        return self.head(y[:, 0])


def fold_output_scale(head: Head, mu: float, sigma: float) -> None:
    """Fold label standardisation into the final linear: out*sigma + mu."""
    with torch.no_grad():
        head.fc2.weight.mul_(sigma)
        head.fc2.bias.mul_(sigma)
        head.fc2.bias.add_(mu)


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
