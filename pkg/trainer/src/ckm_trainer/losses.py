"""Training losses: masked smooth-L1 + CDF slope MAE + mask BCE, and the
scalar smooth-L1 for SE regression.  Numerically identical to the
inference engine's definitions (per-record means, empty selections -> 0).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def smooth_l1(err: torch.Tensor, delta: float) -> torch.Tensor:
    e = err.abs()
    return torch.where(e < delta, 0.5 * e * e / delta, e - 0.5 * delta)


def lps_loss(
    pred_q: torch.Tensor,  # (B, 48)
    mask_logits: torch.Tensor,  # (B, 48)
    label_q: torch.Tensor,  # (B, 48)
    label_mask: torch.Tensor,  # (B, 48) bool
    delta: float = 0.5,
    gamma: float = 0.2,
    eta: float = 20.0,
):
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    m = label_mask.to(pred_q.dtype)
    n_valid = m.sum(dim=1)
    per_q = smooth_l1(pred_q - label_q, delta) * m
    smooth = torch.where(
        n_valid > 0, per_q.sum(dim=1) / n_valid.clamp(min=1.0), torch.zeros_like(n_valid)
    )

    slope_terms, slope_counts = [], []
    for g in range(3):
        s = slice(16 * g, 16 * (g + 1))
        pair = m[:, s][:, 1:] * m[:, s][:, :-1]
        dp = pred_q[:, s].diff(dim=1)
        dl = label_q[:, s].diff(dim=1)
        slope_terms.append(((dp - dl).abs() * pair).sum(dim=1))
        slope_counts.append(pair.sum(dim=1))
    n_pairs = sum(slope_counts)
    slope = torch.where(
        n_pairs > 0,
        sum(slope_terms) / n_pairs.clamp(min=1.0),
        torch.zeros_like(n_pairs),
    )

    bce = F.binary_cross_entropy_with_logits(mask_logits, m, reduction="none").mean(dim=1)

    total = smooth + gamma * slope + eta * bce
    return total.mean(), {
        "smooth": float(smooth.mean().detach()),
        "slope": float(slope.mean().detach()),
        "bce": float(bce.mean().detach()),
    }


def se_loss(pred: torch.Tensor, label: torch.Tensor, delta: float = 1.0) -> torch.Tensor:
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    return smooth_l1(pred - label, delta).mean()
