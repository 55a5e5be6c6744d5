import numpy as np
import pytest

from ckm_trainer import data as D


class TestLoaders:
    def test_lps_shapes(self, tiny_datasets):
        ds = D.load_lps(tiny_datasets["lps"])
        n = ds.features.shape[0]
        assert ds.features.shape == (n, 15)
        assert ds.quantiles.shape == (n, 48)
        assert ds.mask.shape == (n, 48)
        assert ds.mask.dtype == bool

    def test_se_shapes_and_canonical_order(self, tiny_datasets):
        ds = D.load_se(tiny_datasets["se"])
        n, m = ds.cats.shape
        assert ds.cdfs.shape == (n, m, 16)
        # canonical: categories non-decreasing within each record
        assert np.all(np.diff(ds.cats, axis=1) >= 0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            D.load_lps(tmp_path / "absent.jsonl")


class TestPleEdges:
    def test_strictly_increasing(self):
        rng = np.random.default_rng(0)
        edges = D.compute_ple_edges(rng.normal(size=500), 64)
        assert edges.size == 65
        assert np.all(np.diff(edges) > 0)

    def test_heavy_ties_repaired(self):
        v = np.concatenate([np.zeros(100), np.ones(5)])
        edges = D.compute_ple_edges(v, 16)
        assert np.all(np.diff(edges) > 0)

    def test_constant_values_fall_back(self):
        edges = D.compute_ple_edges(np.full(50, 3.0), 8)
        assert edges.size == 9
        assert np.all(np.diff(edges) > 0)
        assert edges[0] < 3.0 < edges[-1]

    def test_encode_matches_engine_formula(self):
        edges = np.array([0.0, 1.0, 3.0])
        got = D.ple_encode_array(np.array([2.0]), edges)
        assert np.allclose(got, [[1.0, 0.5]])


class TestSplits:
    def test_ratios_and_disjoint(self):
        tr, va, te = D.split_indices(100, seed=3)
        assert len(tr) == 80 and len(va) == 10 and len(te) == 10
        assert len(set(tr) | set(va) | set(te)) == 100

    def test_deterministic(self):
        a = D.split_indices(57, seed=9)
        b = D.split_indices(57, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_kfold_partitions(self):
        idx = np.arange(40)
        folds = list(D.kfold_indices(idx, 5, seed=1))
        assert len(folds) == 5
        all_val = np.concatenate([v for _, v in folds])
        assert sorted(all_val.tolist()) == list(range(40))
        for tr, va in folds:
            assert not (set(tr) & set(va))
