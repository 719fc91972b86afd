import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from xplain.data import (Binarizer, TabularDataset, binarize_from_trees, load_csv, standardize,
                         tree_thresholds)
from xplain.errors import (EmptyDataset, MissingValue, NoLabels, NoSplittableFeature,
                           ParseFailure, UnknownColumn)


def _gini(y):
    if len(y) == 0:
        return 0.0
    p = np.bincount(y, minlength=2) / len(y)
    return 1.0 - (p * p).sum()


def stump_oracle(x, y):
    """Midpoint with the largest Gini gain, scanning every gap; ties to the smaller."""
    vals = np.unique(x)
    best, best_t = -1.0, None
    for a, b in zip(vals[:-1], vals[1:]):
        t = (a + b) / 2
        left, right = y[x <= t], y[x > t]
        gain = _gini(y) - (len(left) * _gini(left) + len(right) * _gini(right)) / len(y)
        if gain > best + 1e-12:
            best, best_t = gain, t
    return best_t


def test_load_basic(write_csv):
    ds = load_csv(write_csv("a,b,label\n1,2,0\n3,4,1\n"), label="label")
    assert ds.n_rows == 2 and ds.n_features == 2
    assert ds.feature_names == ["a", "b"]
    assert ds.kinds == ["numeric", "numeric"]
    assert list(ds.labels) == [0, 1]


def test_load_missing_value(write_csv):
    with pytest.raises(MissingValue) as err:
        load_csv(write_csv("a,b,label\n1,,0\n"), label="label")
    assert err.value.row == 1 and err.value.col == "b"


def test_load_categorical_levels(write_csv):
    ds = load_csv(write_csv("color,label\nred,0\nblue,1\nred,0\n"),
                  {"color": "categorical"}, "label")
    assert list(ds.values[:, 0]) == [0, 1, 0]
    assert ds.levels["color"] == ["red", "blue"]


def test_load_errors(write_csv):
    with pytest.raises(UnknownColumn):
        load_csv(write_csv("a,label\n1,0\n"), label="nope")
    with pytest.raises(UnknownColumn):
        load_csv(write_csv("a,label\n1,0\n"), {"zzz": "numeric"}, "label")
    with pytest.raises(ParseFailure):
        load_csv(write_csv("a,label\nx,0\n"), label="label")
    with pytest.raises(ParseFailure):
        load_csv(write_csv("a,b,label\n1,2,3,0\n"), label="label")
    with pytest.raises(EmptyDataset):
        load_csv(write_csv(""))
    with pytest.raises(EmptyDataset):
        load_csv(write_csv("a,label\n"), label="label")


def test_load_label_column_in_middle(write_csv):
    ds = load_csv(write_csv("a,label,b\n1,1,2\n3,0,4\n"), label="label")
    assert ds.feature_names == ["a", "b"]
    assert np.array_equal(ds.values, [[1, 2], [3, 4]])
    assert list(ds.labels) == [1, 0]


def test_standardize_examples():
    ds = TabularDataset.from_arrays(np.array([[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]])[:2])
    scaler, z = standardize(ds)
    assert np.allclose(z.values[:, 0], [-1, 1])
    assert scaler.mean[0] == 2 and scaler.scale[0] == 1
    assert np.allclose(z.values[:, 1], 0) and scaler.scale[1] == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), min_size=1, max_size=20))
@example([[0.0, 682.9131273908922, 0.0]] * 3)      # mean() off by an ulp
@example([[0.0, 0.0, 0.0], [0.0, 0.0, 4.2110541809853584e-290]])   # std underflows
def test_standardize_round_trip(rows):
    X = np.array(rows)
    scaler, z = standardize(TabularDataset.from_arrays(X))
    assert np.allclose(scaler.inverse(z.values), X, atol=1e-12 * max(1.0, np.abs(X).max()))
    assert np.allclose(z.values.mean(axis=0), 0, atol=1e-9)


def test_binary_feature_passthrough():
    ds = TabularDataset.from_arrays(np.array([[0.0], [1.0], [1.0], [0.0]]), np.array([0, 1, 1, 0]),
                                    kinds=["binary"])
    binz, B = binarize_from_trees(ds)
    assert [str(l) for l in binz.catalog.literals] == ["x0 == 0", "x0 == 1"]
    assert binz.thresholds == {}


def test_single_threshold_matches_stump_oracle():
    x = np.array([0.1, 0.2, 0.8, 0.9])
    y = np.array([0, 0, 1, 1])
    ds = TabularDataset.from_arrays(x[:, None], y)
    binz, _ = binarize_from_trees(ds, max_thresholds_per_feature=1)
    assert binz.thresholds["x0"] == pytest.approx([0.5])
    assert stump_oracle(x, y) == pytest.approx(0.5)


def test_depth1_threshold_equals_oracle_on_random_data():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = np.round(rng.normal(size=15), 2)
        y = rng.integers(0, 2, 15)
        if len(np.unique(x)) < 2 or len(np.unique(y)) < 2:
            continue
        assert tree_thresholds(x, y, 1, tree_depth=1) == pytest.approx([stump_oracle(x, y)])


def test_categorical_literals():
    ds = TabularDataset(["c"], ["categorical"], np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 0]),
                        {"c": ["a", "b", "z"]})
    binz, B = binarize_from_trees(ds)
    assert [str(l) for l in binz.catalog.literals] == [
        "c == a", "c != a", "c == b", "c != b", "c == z", "c != z"]
    assert np.array_equal(B[:, 0], [1, 0, 0])


def test_binarize_errors():
    with pytest.raises(NoLabels):
        binarize_from_trees(TabularDataset.from_arrays(np.ones((3, 2))))
    with pytest.raises(NoSplittableFeature):
        binarize_from_trees(TabularDataset.from_arrays(np.ones((3, 2)), np.array([0, 1, 0])))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_binarizer_properties(seed, k):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(30, 3)), 1)
    y = (X[:, 0] + rng.normal(scale=0.5, size=30) > 0).astype(np.int64)
    ds = TabularDataset.from_arrays(X, y)
    binz, B = binarize_from_trees(ds, max_thresholds_per_feature=k)
    assert set(np.unique(B)) <= {0, 1}
    for name, ts in binz.thresholds.items():
        assert len(ts) <= k
        assert all(a < b for a, b in zip(ts, ts[1:]))
    # complements, reproducibility and serialization
    for i in range(len(binz.catalog)):
        assert np.array_equal(B[:, i], 1 - B[:, binz.catalog.complement(i)])
    assert np.array_equal(binz.transform(X), B)
    assert np.array_equal(Binarizer.from_dict(binz.to_dict()).transform(X), B)
    # more thresholds never drop one already selected
    bigger, _ = binarize_from_trees(ds, max_thresholds_per_feature=k + 1)
    for name, ts in binz.thresholds.items():
        assert set(ts) <= set(bigger.thresholds[name])
