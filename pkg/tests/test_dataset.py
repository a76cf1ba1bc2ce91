import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from featvec.dataset import (CATEGORICAL, CLASSIFICATION, NUMERIC, REGRESSION, FeatureSchema,
                             FeatureSpec, infer_schema, load_csv, load_wine_quality, save_csv,
                             train_test_split)
from featvec.errors import DataError, DataParseError, SchemaError
from helpers import make_ds


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_first_appearance_categorical_coding(tmp_path):
    path = write(tmp_path, "a,b,y\n1.5,x,0\n2.0,y,1\n3.0,x,0\n")
    ds = load_csv(path)
    assert ds.schema.features == (FeatureSpec("a", NUMERIC), FeatureSpec("b", CATEGORICAL))
    np.testing.assert_array_equal(ds.X[:, 1], [0, 1, 0])
    np.testing.assert_array_equal(ds.X[:, 0], [1.5, 2.0, 3.0])
    assert ds.codes["b"] == ("x", "y")
    assert ds.decode("b", ds.X[:, 1]) == ["x", "y", "x"]


def test_column_absent_from_schema_is_dropped_with_warning(tmp_path):
    path = write(tmp_path, "extra,a,y\n9,1,0\n9,2,1\n")
    schema = FeatureSchema((FeatureSpec("a"),), "y")
    with pytest.warns(UserWarning, match="extra"):
        ds = load_csv(path, schema)
    assert ds.feature_names == ["a"]
    np.testing.assert_array_equal(ds.X[:, 0], [1, 2])


def test_columns_follow_schema_order(tmp_path):
    path = write(tmp_path, "b,a,y\n1,2,0\n3,4,1\n")
    ds = load_csv(path, FeatureSchema((FeatureSpec("a"), FeatureSpec("b")), "y"))
    np.testing.assert_array_equal(ds.X, [[2, 1], [4, 3]])


def test_wine_quality_bundle():
    ds = load_wine_quality()
    assert ds.d == 11
    assert ds.n == 1599
    assert ds.schema.target == "quality"
    assert ds.task == CLASSIFICATION
    # class codes follow the sorted quality scores
    assert list(ds.classes) == sorted(ds.classes, key=float)


def test_missing_value_raises_unless_imputed(tmp_path):
    path = write(tmp_path, "a,b,y\n1,x,0\n,y,1\n3,,0\n5,y,1\n")
    with pytest.raises(DataError, match="missing"):
        load_csv(path)
    ds = load_csv(path, impute=True)
    assert ds.X[1, 0] == 3.0  # median of 1, 3, 5
    assert ds.decode("b", [ds.X[2, 1]]) == ["y"]  # mode


def test_missing_target_always_raises(tmp_path):
    path = write(tmp_path, "a,y\n1,0\n2,\n3,1\n")
    with pytest.raises(DataError, match="target"):
        load_csv(path, FeatureSchema((FeatureSpec("a"),), "y"), impute=True)


def test_unparseable_numeric_cell(tmp_path):
    path = write(tmp_path, "a,y\n1,0\nabc,1\n")
    with pytest.raises(DataParseError) as info:
        load_csv(path, FeatureSchema((FeatureSpec("a"),), "y"))
    assert "abc" in str(info.value)


def test_schema_column_missing_from_header(tmp_path):
    path = write(tmp_path, "a,y\n1,0\n2,1\n")
    with pytest.raises(SchemaError):
        load_csv(path, FeatureSchema((FeatureSpec("a"), FeatureSpec("b")), "y"))


def test_ragged_rows_and_empty_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, "a,y\n1,0\n2\n"))
    with pytest.raises(DataError):
        load_csv(write(tmp_path, "", name="empty.csv"))
    with pytest.raises(DataError):
        load_csv(write(tmp_path, "a,y\n1,0\n", name="one.csv"))


def test_schema_validation():
    with pytest.raises(SchemaError):
        FeatureSchema((FeatureSpec("a"), FeatureSpec("a")), "y")
    with pytest.raises(SchemaError):
        FeatureSchema((FeatureSpec("a"),), "a")
    with pytest.raises(SchemaError):
        FeatureSpec("a", "ordinal")
    with pytest.raises(SchemaError):
        FeatureSchema.from_dict({"features": [{"name": "a"}]})


def test_infer_schema_task():
    header = ["a", "y"]
    assert infer_schema(header, [["1", "0"], ["2", "1"]]).task == CLASSIFICATION
    assert infer_schema(header, [["1", "0.5"], ["2", "1.25"]]).task == REGRESSION
    assert infer_schema(header, [["1", "no"], ["2", "yes"]]).task == CLASSIFICATION


def test_schema_and_csv_round_trip(tmp_path):
    path = write(tmp_path, "a,b,y\n1.5,x,lo\n2.0,y,hi\n3.0,x,lo\n")
    ds = load_csv(path)
    ds.schema.save(tmp_path / "s.json")
    schema = FeatureSchema.load(tmp_path / "s.json")
    assert schema == ds.schema
    save_csv(ds, tmp_path / "out.csv")
    again = load_csv(tmp_path / "out.csv", schema)
    np.testing.assert_array_equal(again.X, ds.X)
    np.testing.assert_array_equal(again.y, ds.y)
    assert again.classes == ds.classes


def test_split_sizes_and_disjointness():
    ds = make_ds(np.arange(10.0)[:, None] * [1, 1], np.arange(10) % 2)
    train, test = train_test_split(ds, 0.2, 7)
    assert (train.n, test.n) == (8, 2)
    ids = np.concatenate([train.X[:, 0], test.X[:, 0]])
    assert sorted(ids) == list(range(10))


def test_split_is_deterministic():
    ds = make_ds(np.arange(50.0), np.arange(50) % 3)
    a, b = train_test_split(ds, 0.3, 11), train_test_split(ds, 0.3, 11)
    np.testing.assert_array_equal(a[1].X, b[1].X)
    np.testing.assert_array_equal(a[0].X, b[0].X)


def test_split_is_stratified():
    y = np.array([0] * 50 + [1] * 50)
    ds = make_ds(np.arange(100.0), y)
    for seed in range(5):
        train, test = train_test_split(ds, 0.5, seed)
        assert abs(int(test.y.sum()) - 25) <= 1
        assert abs(int(train.y.sum()) - 25) <= 1


@given(st.integers(4, 200), st.floats(0.05, 0.95), st.integers(0, 2 ** 32 - 1))
def test_split_partitions_rows(n, frac, seed):
    ds = make_ds(np.arange(float(n)), np.arange(n) % 2)
    if int(np.floor(n * frac)) < 1 or n - int(np.floor(n * frac)) < 1:
        with pytest.raises(ValueError):
            train_test_split(ds, frac, seed)
        return
    train, test = train_test_split(ds, frac, seed)
    assert test.n == int(np.floor(n * frac))
    assert sorted(np.concatenate([train.X[:, 0], test.X[:, 0]]).tolist()) == list(range(n))


def test_split_rejects_bad_fraction():
    ds = make_ds(np.arange(10.0), np.arange(10) % 2)
    for frac in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            train_test_split(ds, frac, 0)


def test_dataset_rejects_non_finite():
    with pytest.raises(DataError):
        make_ds([[1.0], [np.nan]], [0, 1])


def test_dataset_is_read_only():
    ds = make_ds([[1.0], [2.0]], [0, 1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5


def test_select_projects_columns():
    ds = make_ds(np.arange(12.0).reshape(4, 3), [0, 1, 0, 1])
    sub = ds.select([2, 0])
    assert sub.feature_names == ["x2", "x0"]
    np.testing.assert_array_equal(sub.X[:, 0], ds.X[:, 2])
