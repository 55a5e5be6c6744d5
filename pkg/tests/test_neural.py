import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airslab import neural
from airslab.neural import (
    LpsOutput,
    WeightsError,
    WeightStore,
    encoder_forward,
    init_weights,
    load_weights,
    lps_forward,
    lps_loss,
    ple_encode,
    save_weights,
    se_forward,
    se_loss,
    smooth_l1,
)


class TestPle:
    def test_interior_point(self):
        assert np.allclose(ple_encode(1.5, np.array([0.0, 1.0, 2.0])), [1.0, 0.5])

    def test_below_range_all_zero(self):
        assert np.allclose(ple_encode(-1.0, np.array([0.0, 1.0, 2.0])), [0.0, 0.0])

    def test_above_range_all_one(self):
        assert np.allclose(ple_encode(9.0, np.array([0.0, 1.0, 2.0])), [1.0, 1.0])

    def test_non_increasing_edges_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ple_encode(0.5, np.array([0.0, 1.0, 1.0]))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1e6, 1e6))
    def test_components_clamped_and_monotone(self, x):
        edges = np.linspace(-10.0, 10.0, 9)
        v = ple_encode(x, edges)
        assert np.all((0.0 <= v) & (v <= 1.0))
        assert np.all(np.diff(v) <= 1e-12)  # later bins only fill after earlier ones


SMALL_DIMS = {"d_model": 32, "heads": 4, "layers": 2, "mlp_hidden": 64, "head_hidden": 8}


def small_lps_ws(seed=0):
    edges = [np.linspace(-100.0, 100.0, SMALL_DIMS["d_model"] + 1) for _ in range(15)]
    return init_weights("lps", seed=seed, ple_edges=edges, dims=SMALL_DIMS)


def small_se_ws(seed=0):
    edges = [np.linspace(-310.0, 0.0, SMALL_DIMS["d_model"] // 16 + 1)]
    return init_weights("se", seed=seed, ple_edges=edges, dims=SMALL_DIMS)


class TestEncoder:
    def test_zero_weights_reduce_to_layernorm(self):
        ws = small_lps_ws()
        for name, t in ws.tensors.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf not in ("g",):
                ws.tensors[name] = np.zeros_like(t)
        x = np.random.default_rng(0).normal(size=(5, SMALL_DIMS["d_model"]))
        got = encoder_forward(x, ws)
        expect = neural.layer_norm(x, np.ones(SMALL_DIMS["d_model"]), np.zeros(SMALL_DIMS["d_model"]))
        assert np.allclose(got, expect, atol=1e-12)

    def test_single_token_independent_of_heads(self):
        x = np.random.default_rng(1).normal(size=(1, SMALL_DIMS["d_model"]))
        ws4 = small_lps_ws(seed=3)
        dims1 = dict(SMALL_DIMS, heads=1)
        ws1 = WeightStore(kind="lps", dims=dims1, ple_edges=ws4.ple_edges, tensors=dict(ws4.tensors))
        assert np.allclose(encoder_forward(x, ws4), encoder_forward(x, ws1), atol=1e-12)

    def test_duplicated_rows_stay_identical(self):
        ws = small_lps_ws(seed=5)
        row = np.random.default_rng(2).normal(size=SMALL_DIMS["d_model"])
        x = np.stack([row, row, row])
        y = encoder_forward(x, ws)
        assert np.allclose(y[0], y[1], atol=1e-12)
        assert np.allclose(y[1], y[2], atol=1e-12)

    def test_shape_mismatch_names_tensor(self):
        ws = small_lps_ws()
        ws.tensors["enc.0.attn.wq"] = np.zeros((3, 3), dtype=np.float32)
        with pytest.raises(WeightsError, match="enc.0.attn.wq"):
            encoder_forward(np.zeros((2, SMALL_DIMS["d_model"])), ws)


class TestLpsForward:
    def test_zero_weights_give_half_mask_probability(self):
        ws = small_lps_ws()
        for name, t in ws.tensors.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf != "g":
                ws.tensors[name] = np.zeros_like(t)
        out = lps_forward(np.zeros(15), ws)
        assert np.allclose(out.mask_prob48, 0.5)
        assert np.allclose(out.quantiles48, 0.0)

    def test_feature_count_checked(self):
        with pytest.raises(ValueError, match="15"):
            lps_forward(np.zeros(14), small_lps_ws())

    def test_feature_swap_with_pos_embed_swap_is_identity(self):
        ws = small_lps_ws(seed=9)
        f = np.linspace(-50.0, 50.0, 15)
        base = lps_forward(f, ws)
        # swap features 3 and 7 along with their position embeddings and edges
        ws2 = WeightStore(kind="lps", dims=ws.dims, ple_edges=list(ws.ple_edges), tensors=dict(ws.tensors))
        pe = ws.tensors["lps.pos_embed"].copy()
        pe[[48 + 3, 48 + 7]] = pe[[48 + 7, 48 + 3]]
        ws2.tensors["lps.pos_embed"] = pe
        ws2.ple_edges[3], ws2.ple_edges[7] = ws2.ple_edges[7], ws2.ple_edges[3]
        f2 = f.copy()
        f2[[3, 7]] = f2[[7, 3]]
        swapped = lps_forward(f2, ws2)
        assert np.allclose(swapped.quantiles48, base.quantiles48, atol=1e-9)
        assert np.allclose(swapped.mask_prob48, base.mask_prob48, atol=1e-9)

    def test_finite_for_extreme_inputs(self):
        ws = small_lps_ws(seed=4)
        out = lps_forward(np.full(15, 1e9), ws)
        assert np.all(np.isfinite(out.quantiles48))
        assert np.all((out.mask_prob48 >= 0.0) & (out.mask_prob48 <= 1.0))


class TestSeForward:
    def test_same_category_permutation_is_bit_exact(self):
        ws = small_se_ws(seed=2)
        rng = np.random.default_rng(0)
        q = rng.uniform(-120.0, -60.0, (6, 16))
        cats = [1, 2, 3, 3, 4, 4]
        base = se_forward(q, cats, ws)
        perm = q.copy()
        perm[[2, 3]] = perm[[3, 2]]
        perm[[4, 5]] = perm[[5, 4]]
        assert se_forward(perm, cats, ws) == base

    def test_zero_weights_return_head_bias(self):
        ws = small_se_ws()
        for name, t in ws.tensors.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf != "g":
                ws.tensors[name] = np.zeros_like(t)
        ws.tensors["se.head.b2"] = np.array([2.5], dtype=np.float32)
        q = np.random.default_rng(1).uniform(-100, -50, (3, 16))
        assert se_forward(q, [1, 3, 4], ws) == pytest.approx(2.5, abs=1e-6)

    def test_missing_direct_rejected(self):
        ws = small_se_ws()
        with pytest.raises(ValueError, match="direct"):
            se_forward(np.zeros((2, 16)), [3, 4], ws)

    def test_two_cascaded_rejected(self):
        ws = small_se_ws()
        with pytest.raises(ValueError, match="cascaded"):
            se_forward(np.zeros((3, 16)), [1, 2, 2], ws)


class TestLosses:
    def _pred(self, q, p):
        return LpsOutput(quantiles48=np.asarray(q, dtype=float), mask_prob48=np.asarray(p, dtype=float))

    def test_perfect_prediction_near_zero(self):
        rng = np.random.default_rng(0)
        q = rng.uniform(-120, -60, 48)
        mask = rng.uniform(size=48) < 0.7
        pred = self._pred(q, np.where(mask, 1.0 - 1e-7, 1e-7))
        parts = lps_loss(pred, q, mask)
        assert parts.total <= 1e-5

    def test_smooth_l1_branch_values(self):
        assert smooth_l1(2 * 0.5, 0.5) == pytest.approx(0.75)
        assert smooth_l1(0.5, 1.0) == pytest.approx(0.125)
        assert smooth_l1(2.0, 1.0) == pytest.approx(1.5)

    def test_single_valid_quantile_error(self):
        q = np.zeros(48)
        mask = np.zeros(48, dtype=bool)
        mask[5] = True
        pred_q = np.zeros(48)
        pred_q[5] = 1.0  # error 2*delta for delta=0.5
        parts = lps_loss(self._pred(pred_q, np.full(48, 0.5)), q, mask, delta=0.5, gamma=0.0, eta=0.0)
        assert parts.smooth == pytest.approx(0.75)
        assert parts.total == pytest.approx(0.75)

    def test_all_invalid_leaves_only_bce(self):
        q = np.zeros(48)
        mask = np.zeros(48, dtype=bool)
        parts = lps_loss(self._pred(np.ones(48), np.full(48, 0.5)), q, mask, eta=20.0)
        assert parts.smooth == 0.0 and parts.slope == 0.0
        assert parts.total == pytest.approx(20.0 * parts.bce)

    def test_slope_part_measures_shape_difference(self):
        label = np.zeros(48)
        mask = np.ones(48, dtype=bool)
        pred_q = np.concatenate([np.arange(16.0), np.zeros(32)])  # slope error 1 in group 0
        parts = lps_loss(self._pred(pred_q, np.full(48, 0.5)), label, mask, delta=0.5, gamma=1.0, eta=0.0)
        assert parts.slope == pytest.approx(15.0 / 45.0)

    def test_continuity_at_kink(self):
        d = 0.5
        below = smooth_l1(d - 1e-12, d)
        above = smooth_l1(d + 1e-12, d)
        assert below == pytest.approx(above, abs=1e-9)
        assert below == pytest.approx(d / 2.0, abs=1e-9)

    def test_se_loss_values(self):
        assert se_loss(2.0, 2.0) == 0.0
        assert se_loss(2.5, 2.0, delta=1.0) == pytest.approx(0.125)
        assert se_loss(4.0, 2.0, delta=1.0) == pytest.approx(1.5)

    def test_delta_ranges_enforced(self):
        with pytest.raises(ValueError):
            lps_loss(self._pred(np.zeros(48), np.full(48, 0.5)), np.zeros(48), np.ones(48, dtype=bool), delta=1.0)
        with pytest.raises(ValueError):
            se_loss(1.0, 1.0, delta=1.5)


class TestWeightsIo:
    def test_round_trip_bit_identical(self, tmp_path):
        ws = small_lps_ws(seed=7)
        p1, p2 = tmp_path / "a.nckm", tmp_path / "b.nckm"
        save_weights(ws, p1)
        save_weights(load_weights(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.nckm"
        p.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(WeightsError, match="bad magic"):
            load_weights(p)

    def test_truncated_tensor(self, tmp_path):
        ws = small_lps_ws(seed=1)
        p = tmp_path / "t.nckm"
        save_weights(ws, p)
        blob = p.read_bytes()
        p.write_bytes(blob[:-8])  # chop the tail of the last tensor
        with pytest.raises(WeightsError, match="truncated tensor"):
            load_weights(p)

    def test_missing_tensor_detected(self):
        ws = small_lps_ws()
        del ws.tensors["lps.mask.w1"]
        with pytest.raises(WeightsError, match="lps.mask.w1"):
            ws.validate()

    def test_loaded_forward_matches_original(self, tmp_path):
        ws = small_lps_ws(seed=11)
        p = tmp_path / "w.nckm"
        save_weights(ws, p)
        ws2 = load_weights(p)
        f = np.linspace(-20, 20, 15)
        a, b = lps_forward(f, ws), lps_forward(f, ws2)
        assert np.array_equal(a.quantiles48, b.quantiles48)
