"""Loss parity against the inference engine: one reference definition,
two implementations, agreement to 1e-6 on shared fixtures."""

import numpy as np
import pytest
import torch

from airslab.neural import LpsOutput
from airslab.neural import lps_loss as engine_lps_loss
from airslab.neural import se_loss as engine_se_loss

from ckm_trainer import losses


def random_fixture(seed: int):
    rng = np.random.default_rng(seed)
    label_q = rng.uniform(-130.0, -60.0, 48)
    mask = rng.uniform(size=48) < 0.8
    pred_q = label_q + rng.normal(0.0, 1.0, 48)
    logits = rng.uniform(-3.0, 3.0, 48)
    return pred_q, logits, label_q, mask


class TestLpsParity:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_engine(self, seed):
        pred_q, logits, label_q, mask = random_fixture(seed)
        probs = 1.0 / (1.0 + np.exp(-logits))
        ref = engine_lps_loss(
            LpsOutput(quantiles48=pred_q, mask_prob48=probs), label_q, mask,
            delta=0.5, gamma=0.2, eta=20.0,
        )
        got, parts = losses.lps_loss(
            torch.from_numpy(pred_q[None]), torch.from_numpy(logits[None]),
            torch.from_numpy(label_q[None]), torch.from_numpy(mask[None]),
            delta=0.5, gamma=0.2, eta=20.0,
        )
        assert float(got) == pytest.approx(ref.total, abs=1e-6)
        assert parts["smooth"] == pytest.approx(ref.smooth, abs=1e-6)
        assert parts["slope"] == pytest.approx(ref.slope, abs=1e-6)
        assert parts["bce"] == pytest.approx(ref.bce, abs=1e-6)

    def test_all_invalid_reduces_to_bce_only(self):
        pred_q, logits, label_q, _ = random_fixture(0)
        mask = np.zeros(48, dtype=bool)
        got, parts = losses.lps_loss(
            torch.from_numpy(pred_q[None]), torch.from_numpy(logits[None]),
            torch.from_numpy(label_q[None]), torch.from_numpy(mask[None]),
        )
        assert parts["smooth"] == 0.0 and parts["slope"] == 0.0
        assert float(got) == pytest.approx(20.0 * parts["bce"], rel=1e-9)

    def test_gamma_eta_zero_is_masked_smooth_l1(self):
        pred_q, logits, label_q, mask = random_fixture(3)
        got, _ = losses.lps_loss(
            torch.from_numpy(pred_q[None]), torch.from_numpy(logits[None]),
            torch.from_numpy(label_q[None]), torch.from_numpy(mask[None]),
            delta=0.5, gamma=0.0, eta=0.0,
        )
        err = np.abs(pred_q - label_q)[mask]
        expect = np.mean(np.where(err < 0.5, 0.5 * err**2 / 0.5, err - 0.25))
        assert float(got) == pytest.approx(float(expect), rel=1e-9)

    def test_batch_mean_of_per_record_losses(self):
        a = random_fixture(1)
        b = random_fixture(2)
        singles = []
        for pred_q, logits, label_q, mask in (a, b):
            v, _ = losses.lps_loss(
                torch.from_numpy(pred_q[None]), torch.from_numpy(logits[None]),
                torch.from_numpy(label_q[None]), torch.from_numpy(mask[None]),
            )
            singles.append(float(v))
        both, _ = losses.lps_loss(
            torch.from_numpy(np.stack([a[0], b[0]])),
            torch.from_numpy(np.stack([a[1], b[1]])),
            torch.from_numpy(np.stack([a[2], b[2]])),
            torch.from_numpy(np.stack([a[3], b[3]])),
        )
        assert float(both) == pytest.approx(np.mean(singles), rel=1e-9)


class TestSeParity:
    @pytest.mark.parametrize("err,delta", [(0.0, 1.0), (0.5, 1.0), (2.0, 1.0), (0.3, 0.5)])
    def test_matches_engine(self, err, delta):
        ref = engine_se_loss(2.0 + err, 2.0, delta=delta)
        got = losses.se_loss(torch.tensor([2.0 + err]), torch.tensor([2.0]), delta=delta)
        assert float(got) == pytest.approx(ref, abs=1e-7)

    def test_delta_range(self):
        with pytest.raises(ValueError):
            losses.se_loss(torch.tensor([1.0]), torch.tensor([1.0]), delta=2.0)
