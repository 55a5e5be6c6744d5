import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airslab import airs as airsmod
from airslab.channel import FadingSpec, sample_links
from airslab.oracle import (
    AnnulusSampler,
    LpsRecord,
    QuantileCdf,
    SeRecord,
    build_se_record,
    ergodic_se,
    ergodic_se_stats,
    gen_lps_dataset,
    gen_se_dataset,
    quantile_cdf,
    read_jsonl,
    snr_sample,
)
from airslab.scene import AirsConfig, SceneConfig, UePos

from conftest import make_random_scene


class TestSnrSample:
    def test_direct_only_reduction(self):
        g = snr_sample(2.0 + 0j, 0j, [], [], p_rb=3.0, sigma_v2=0.5, sigma_02=2.0)
        assert g == pytest.approx(3.0 * 4.0 / 2.0)

    def test_destructive_cancellation(self):
        g = snr_sample(1.0 + 0j, -1.0 + 0j, [], [], p_rb=1.0, sigma_v2=0.1, sigma_02=1.0)
        assert g == 0.0

    def test_hand_arithmetic(self):
        g = snr_sample(
            1.0 + 0j, 1.0j, [], [2.0], p_rb=1.0, sigma_v2=0.5, sigma_02=1.0
        )
        assert g == pytest.approx(1.0)

    def test_requires_positive_receiver_noise(self):
        with pytest.raises(ValueError):
            snr_sample(1.0 + 0j, 0j, [], [], 1.0, 0.0, 0.0)


class TestErgodicSe:
    def test_deterministic_channel_gives_exact_log(self):
        scene = SceneConfig(n_rb=4, airs=(), ues=(UePos(60.0, -12.0),))
        spec = FadingSpec(
            n_large=1, n_small=1, n_taps=1,
            rician_k_nlos_db=math.inf,
            shadow_sigma_los_db=0.0, shadow_sigma_nlos_db=0.0, seed=3,
        )
        lr = sample_links(scene, scene.ues[0], spec)
        gamma = scene.p_rb_mw * abs(lr.direct[0, 0]) ** 2 / scene.sigma0_sq_mw
        got = ergodic_se(scene, scene.ues[0], None, "mccm", spec)
        assert got == pytest.approx(math.log2(1.0 + gamma), rel=1e-12)

    def test_dark_serving_panel_equals_no_serving(self, cheap_spec):
        # panel faces the BS; the UE sits behind it -> zero cascade
        panel = AirsConfig(pos=(30.0, 0.0, 10.0), rot=(0.0, 0.0, math.pi), grid=(4, 4))
        scene = SceneConfig(n_rb=4, airs=(panel,), ues=(UePos(60.0, 0.0),))
        a = ergodic_se(scene, scene.ues[0], None, "mccm", cheap_spec)
        b = ergodic_se(scene, scene.ues[0], 0, "mccm", cheap_spec)
        assert a == pytest.approx(b, rel=1e-12)

    def test_mc_self_consistency_against_larger_run(self):
        scene = make_random_scene(21, n_airs=1, ue_near_panel=True)
        ue = scene.ues[0]
        # same seed: identical shadowing, ten times the small-scale draws
        small = FadingSpec(n_large=5, n_small=100, seed=2)
        big = replace(small, n_small=1000)
        a = ergodic_se_stats(scene, ue, 0, "mccm", small)
        b = ergodic_se_stats(scene, ue, 0, "mccm", big)
        assert abs(a.mean - b.mean) <= 3.0 * math.hypot(a.stderr, b.stderr)

    def test_rb_permutation_invariance(self, two_panel_scene, cheap_spec):
        ue = two_panel_scene.ues[0]
        lr = sample_links(two_panel_scene, ue, cheap_spec)
        base = ergodic_se(two_panel_scene, ue, 0, "mccm", cheap_spec, lr=lr)
        perm = np.random.default_rng(1).permutation(lr.n_rb)
        lr.direct = lr.direct[:, perm]
        lr.cascade_elem = [a[:, perm] for a in lr.cascade_elem]
        lr.airs_ue_norm_sq = lr.airs_ue_norm_sq[:, perm]
        lr.incident_elem_sq = lr.incident_elem_sq[:, perm]
        got = ergodic_se(two_panel_scene, ue, 0, "mccm", cheap_spec, lr=lr)
        assert got == pytest.approx(base, rel=1e-12)

    def test_throughput_linear_in_ratio(self):
        # R = rho * S * SE exactly
        se = 3.7
        s_rb = 16
        for rho in (0.0, 0.25, 0.5, 1.0):
            assert rho * s_rb * se == pytest.approx(rho * (s_rb * se))


class TestQuantileCdf:
    def test_sixteen_distinct_samples_map_identically(self):
        cdf = quantile_cdf(np.arange(1.0, 17.0))
        assert np.array_equal(cdf.q_db, np.arange(1.0, 17.0))
        assert cdf.mask.all()

    def test_constant_samples(self):
        cdf = quantile_cdf(np.full(100, -37.5))
        assert np.all(cdf.q_db == -37.5)
        assert cdf.mask.all()

    def test_all_no_power_readings_masked(self):
        cdf = quantile_cdf(np.full(64, -300.0))
        assert not cdf.mask.any()
        assert np.all(cdf.q_db == -300.0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError, match="16"):
            quantile_cdf(np.arange(15.0))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-200.0, 50.0), min_size=16, max_size=200))
    def test_valid_quantiles_non_decreasing(self, samples):
        cdf = quantile_cdf(np.asarray(samples))
        cdf.validate()
        valid = cdf.q_db[cdf.mask]
        assert np.all(np.diff(valid) >= 0.0)

    def test_partial_mask_consistency(self):
        samples = np.concatenate([np.full(40, -300.0), np.linspace(-80, -60, 40)])
        cdf = quantile_cdf(samples)
        assert not cdf.mask[0] and cdf.mask[-1]
        assert np.all(cdf.q_db[~cdf.mask] == -300.0)


class TestDatasets:
    def _scene(self):
        return make_random_scene(31, n_airs=2, grid=(4, 4))

    def test_lps_structure_single_record(self, tmp_path):
        out = tmp_path / "lps.jsonl"
        n = gen_lps_dataset(self._scene(), AnnulusSampler(), 1, FadingSpec(n_large=2, n_small=10, seed=3), out)
        assert n == 1
        rec = read_jsonl(out)
        assert len(rec) == 1
        obj = rec[0]
        assert len(obj["features"]) == 15
        assert len(obj["cdf_direct"]) == 16
        assert len(obj["mask"]) == 48
        LpsRecord.from_json_obj(obj)  # parses and validates

    def test_lps_deterministic_bytes(self, tmp_path):
        spec = FadingSpec(n_large=2, n_small=10, seed=4)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        gen_lps_dataset(self._scene(), AnnulusSampler(), 6, spec, a)
        gen_lps_dataset(self._scene(), AnnulusSampler(), 6, spec, b)
        assert a.read_bytes() == b.read_bytes()

    def test_cascaded_dominates_scattered(self, tmp_path):
        # beamforming gain: for the same UE, each valid cascaded quantile is
        # at least the scattered one (checked on 3 seeds)
        scene = make_random_scene(33, n_airs=1, grid=(6, 6), ue_near_panel=True)
        sampler = AnnulusSampler(r_min=30.0, r_max=45.0)
        for seed in (0, 1, 2):
            out = tmp_path / f"d{seed}.jsonl"
            gen_lps_dataset(scene, sampler, 2, FadingSpec(n_large=3, n_small=60, seed=seed), out)
            casc, scat = [LpsRecord.from_json_obj(o) for o in read_jsonl(out)]
            assert casc.features[-1] == 1.0 and scat.features[-1] == 0.0
            both = casc.cdf_link.mask & scat.cdf_link.mask
            assert np.all(casc.cdf_link.q_db[both] >= scat.cdf_link.q_db[both])

    def test_se_structure(self, tmp_path):
        out = tmp_path / "se.jsonl"
        n = gen_se_dataset(self._scene(), AnnulusSampler(), 10, FadingSpec(n_large=2, n_small=10, seed=5), out)
        assert n == 10
        objs = read_jsonl(out)
        assert len(objs) == 10
        for obj in objs:
            rec = SeRecord.from_json_obj(obj)
            assert len(rec.cdfs) == 2 * 2 + 1  # 2 panels
            assert rec.cats.count(1) == 1
            assert rec.cats.count(4) == 2
            assert rec.se >= 0.0

    def test_se_without_serving_has_no_cascaded_category(self):
        scene = self._scene()
        rec = build_se_record(scene, scene.ues[0], None, FadingSpec(n_large=2, n_small=10, seed=6))
        assert 2 not in rec.cats
        assert rec.cats.count(3) == scene.n_airs

    def test_se_deterministic_bytes(self, tmp_path):
        spec = FadingSpec(n_large=2, n_small=10, seed=7)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        gen_se_dataset(self._scene(), AnnulusSampler(), 4, spec, a)
        gen_se_dataset(self._scene(), AnnulusSampler(), 4, spec, b)
        assert a.read_bytes() == b.read_bytes()

    def test_zero_records_empty_file(self, tmp_path):
        out = tmp_path / "empty.jsonl"
        assert gen_lps_dataset(self._scene(), AnnulusSampler(), 0, FadingSpec(seed=1), out) == 0
        assert out.read_text() == ""


class TestSeRecordInvariants:
    def test_rejects_two_direct_cdfs(self):
        q = QuantileCdf(np.zeros(16), np.ones(16, dtype=bool))
        with pytest.raises(ValueError, match="direct"):
            SeRecord(cdfs=(q, q), cats=(1, 1), se=1.0).validate()

    def test_rejects_two_cascaded(self):
        q = QuantileCdf(np.zeros(16), np.ones(16, dtype=bool))
        with pytest.raises(ValueError, match="cascaded"):
            SeRecord(cdfs=(q, q, q), cats=(1, 2, 2), se=1.0).validate()
