import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discreteclf import DataError, Dataset, binarize, dataset_from_arrays, load_dataset, make_weights


def test_breastcancer_loads(breastcancer_csv, breastcancer_schema):
    ds = load_dataset(breastcancer_csv, breastcancer_schema)
    assert ds.N == 683 and ds.P == 9
    assert ds.n_pos == 239 and ds.n_neg == 444
    assert np.all(ds.X[:, 0] == 1.0)
    assert ds.feature_names[0] == "ClumpThickness"


def test_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\n1,1\n2,0\n")
    with pytest.raises(DataError, match="unknown label"):
        load_dataset(p)
    p.write_text("a,y\nx,1\n")
    with pytest.raises(DataError, match="non-numeric"):
        load_dataset(p, {"kinds": {"a": "real"}})
    p.write_text("a,y\n1,1\n")
    with pytest.raises(DataError, match="not found"):
        load_dataset(p, label="z")
    p.write_text("a,y\n1,1,3\n")
    with pytest.raises(DataError, match="expected 2 fields"):
        load_dataset(p)


def test_label_map_and_categorical(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("color,size,out\nred,1.5,yes\nblue,2.0,no\nred,0.5,no\n")
    ds = load_dataset(p, {"label_map": {"yes": 1, "no": -1}})
    assert ds.y.tolist() == [1, -1, -1]
    assert ds.kinds == ("categorical", "real")
    rules, rs = binarize(ds, expand_real=False)
    assert rules.P == 3  # two category indicators plus the real passthrough
    assert rules.X[:, 1:3].sum(axis=1).tolist() == [1.0, 1.0, 1.0]


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.array([[2.0, 1.0]]), np.array([1]), ("a",), ("real",))
    with pytest.raises(DataError):
        dataset_from_arrays(np.array([[1.0]]), [0])
    with pytest.raises(DataError):
        dataset_from_arrays(np.array([[np.nan]]), [1])


def test_subset_keeps_denominator():
    ds = dataset_from_arrays(np.arange(6.0)[:, None], [1, -1, 1, -1, 1, -1])
    sub = ds.subset([0, 1], keep_denominator=True)
    assert sub.N == 2 and sub.denominator == 6
    assert ds.subset([0, 1]).denominator == 2


def test_weights_modes():
    ds = dataset_from_arrays(np.zeros((5, 1)), [1, 1, -1, -1, -1])
    assert make_weights(ds).w_plus == 0.5
    b = make_weights(ds, "balanced")
    assert b.w_plus == pytest.approx(0.6)
    w = make_weights(ds, "all-positives-correct")
    # one positive error costs more than every negative error together
    assert 2 * w.w_plus > 3 * 2 * w.w_minus
    w = make_weights(ds, "all-negatives-correct")
    assert 2 * w.w_minus > 2 * 2 * w.w_plus
    with pytest.raises(DataError):
        make_weights(ds, "explicit", w_plus=1.0)


def test_domain_threshold_rules(breastcancer_csv, breastcancer_schema):
    ds = load_dataset(breastcancer_csv, breastcancer_schema)
    rules, rs = binarize(ds, "domain", [3], complement=True)
    assert rules.P == 18
    assert rules.is_binary
    # each rule and its complement add up to one
    assert np.all(rules.X[:, 1::2] + rules.X[:, 2::2] == 1.0)
    again = rs.apply(ds)
    assert np.array_equal(again.X, rules.X)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=15))
def test_midpoint_rules_are_monotone(col):
    if len(set(col)) < 2:
        return
    ds = dataset_from_arrays(np.array(col, float)[:, None], [1] * len(col))
    rules, _ = binarize(ds)
    assert rules.P == len(set(col)) - 1
    # a larger threshold never fires where a smaller one does not
    assert np.all(np.diff(rules.X[:, 1:], axis=1) <= 0)
