import numpy as np
import pandas as pd
import pytest

from hesvm import data
from hesvm.data import DataError


def write_csv(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestIngest:
    def test_label_mapping(self, tmp_path):
        p = write_csv(tmp_path, "a,label\n1,+\n2,-\n")
        ds = data.ingest_csv(p, "label")
        assert ds.labels.tolist() == [1, -1]

    def test_one_hot(self, tmp_path):
        p = write_csv(tmp_path, "c,label\na,+\nb,-\na,+\n")
        ds = data.ingest_csv(p, "label")
        assert ds.feature_names == ["c=a", "c=b"]
        assert np.allclose(ds.features.sum(axis=1), 1.0)
        assert ds.categorical_vocab == {"c": ["a", "b"]}

    def test_vocab_alignment(self, tmp_path):
        p = write_csv(tmp_path, "c,label\na,+\na,-\n")
        ds = data.ingest_csv(p, "label", vocab={"c": ["a", "b"]})
        assert ds.feature_names == ["c=a", "c=b"]
        assert np.allclose(ds.features[:, 1], 0.0)

    def test_median_imputation(self, tmp_path):
        p = write_csv(tmp_path, "x,label\n1,+\n,-\n3,+\n")
        ds = data.ingest_csv(p, "label")
        assert ds.features[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_mode_imputation(self, tmp_path):
        p = write_csv(tmp_path, "c,label\na,+\n,-\na,+\nb,-\n")
        ds = data.ingest_csv(p, "label")
        col_a = ds.features[:, ds.feature_names.index("c=a")]
        assert col_a[1] == 1.0

    def test_missing_label_column(self, tmp_path):
        p = write_csv(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="label"):
            data.ingest_csv(p, "label")

    def test_unmapped_label(self, tmp_path):
        p = write_csv(tmp_path, "a,label\n1,weird\n")
        with pytest.raises(DataError):
            data.ingest_csv(p, "label")

    def test_empty_file(self, tmp_path):
        p = write_csv(tmp_path, "a,label\n")
        with pytest.raises(DataError):
            data.ingest_csv(p, "label")

    def test_custom_mapping(self, tmp_path):
        p = write_csv(tmp_path, "a,label\n1,yes\n2,no\n")
        ds = data.ingest_csv(p, "label", label_mapping={"yes": 1, "no": -1})
        assert ds.labels.tolist() == [1, -1]


class TestScaler:
    def test_hand_example(self):
        ds = data.Dataset(np.array([[2.0], [4.0], [6.0]]), np.array([1, -1, 1]), ["x"])
        sc = data.fit_scaler(ds)
        assert sc.mu[0] == 4.0
        assert abs(sc.sigma[0] - 1.63299) < 1e-5
        out = data.standardize(ds, sc)
        assert np.allclose(out.features[:, 0], [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_train_columns_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        ds = data.Dataset(rng.normal(2, 3, (200, 4)), np.sign(rng.normal(size=200) + 0.1).astype(int) | 1, list("abcd"))
        out = data.standardize(ds, data.fit_scaler(ds))
        assert np.max(np.abs(out.features.mean(axis=0))) <= 1e-9
        assert np.max(np.abs(out.features.std(axis=0) - 1)) <= 1e-9

    def test_zero_variance_rejected(self):
        ds = data.Dataset(np.ones((3, 1)), np.array([1, -1, 1]), ["const"])
        with pytest.raises(DataError, match="const"):
            data.fit_scaler(ds)

    def test_drop_constant_columns(self):
        X = np.column_stack([np.ones(4), np.arange(4.0)])
        ds = data.Dataset(X, np.array([1, -1, 1, -1]), ["c", "x"])
        out = data.drop_constant_columns(ds)
        assert out.feature_names == ["x"]


class TestSelection:
    def test_perfect_correlation_selected(self):
        y = np.array([1, -1, 1, -1, 1, -1])
        X = np.column_stack([y.astype(float), np.array([0.3, 0.1, 0.2, 0.25, 0.15, 0.22])])
        sel = data.select_features(data.Dataset(X, y, ["lab", "noise"]))
        assert 0 in sel.selected
        assert abs(sel.scores[0] - 1.0) < 1e-12

    def test_independent_feature_dropped(self):
        rng = np.random.default_rng(1)
        y = np.where(rng.uniform(size=10_000) < 0.5, 1, -1)
        X = np.column_stack([y + 0.1 * rng.normal(size=y.size),
                             y + 0.1 * rng.normal(size=y.size),
                             rng.normal(size=y.size)])
        sel = data.select_features(data.Dataset(X, y, ["s1", "s2", "junk"]))
        assert sel.scores[2] < 0.05
        assert sel.selected == [0, 1]

    def test_top_two_fallback(self):
        rng = np.random.default_rng(2)
        y = np.where(rng.uniform(size=500) < 0.5, 1, -1)
        X = np.column_stack([y + 2.0 * rng.normal(size=y.size), rng.normal(size=y.size)])
        sel = data.select_features(data.Dataset(X, y, ["weak", "junk"]), threshold=0.99)
        assert len(sel.selected) == 2

    def test_selected_sorted_unique(self):
        rng = np.random.default_rng(3)
        y = np.where(rng.uniform(size=300) < 0.5, 1, -1)
        X = rng.normal(size=(300, 5)) + y[:, None]
        sel = data.select_features(data.Dataset(X, y, list("abcde")))
        assert sel.selected == sorted(set(sel.selected))


class TestSplit:
    def test_sizes_690(self):
        rng = np.random.default_rng(4)
        y = np.where(rng.uniform(size=690) < 0.5, 1, -1)
        ds = data.Dataset(rng.normal(size=(690, 2)), y, ["a", "b"])
        train, test = data.train_test_split(ds, seed=11, test_ratio=0.2)
        assert (train.m, test.m) == (552, 138)

    def test_deterministic_and_disjoint(self):
        rng = np.random.default_rng(5)
        X = np.arange(100, dtype=float)[:, None]
        y = np.where(rng.uniform(size=100) < 0.5, 1, -1)
        ds = data.Dataset(X, y, ["i"])
        t1a, t1b = data.train_test_split(ds, seed=7)
        t2a, t2b = data.train_test_split(ds, seed=7)
        assert np.array_equal(t1a.features, t2a.features)
        assert np.array_equal(t1b.features, t2b.features)
        assert not set(t1a.features[:, 0]) & set(t1b.features[:, 0])

    def test_bad_ratio(self):
        ds = data.Dataset(np.zeros((4, 1)) + np.arange(4)[:, None],
                          np.array([1, -1, 1, -1]), ["x"])
        with pytest.raises(DataError):
            data.train_test_split(ds, seed=1, test_ratio=1.5)
