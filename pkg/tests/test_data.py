import json
import warnings

import numpy as np
import pandas as pd
import pytest

from mipnn.data import (
    SYNTHETIC_SCHEMA,
    Column,
    RawTable,
    Schema,
    encode,
    fit_encode,
    fit_schema,
    load_csv,
    load_encoded,
    make_separable,
    save_encoded,
    subsample,
    synthetic_tables,
    write_synthetic,
)
from mipnn.errors import InputError, ParseError

SCHEMA = Schema(
    (
        Column("colour", "categorical"),
        Column("amount", "numerical"),
        Column("label", "label"),
    )
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_missing_value_rows_are_dropped(tmp_path):
    path = write(tmp_path / "t.csv", "colour,amount,label\n a ,1,x\nb,,y\nc,3, x\n")
    table = load_csv(path, SCHEMA)
    assert len(table) == 2 and table.dropped == 1
    assert list(table.frame["colour"]) == ["a", "c"]
    assert list(table.frame["label"]) == ["x", "x"]


def test_question_mark_counts_as_missing(tmp_path):
    path = write(tmp_path / "t.csv", "colour,amount,label\n?,1,x\nb,2,y\n")
    assert load_csv(path, SCHEMA).dropped == 1


def test_malformed_number_is_rejected(tmp_path):
    path = write(tmp_path / "t.csv", "colour,amount,label\na,abc,x\nb,2,y\n")
    table = load_csv(path, SCHEMA)
    assert len(table) == 1 and table.rejected == 1


def test_header_mismatch(tmp_path):
    path = write(tmp_path / "t.csv", "colour,value,label\na,1,x\n")
    with pytest.raises(ParseError):
        load_csv(path, SCHEMA)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_csv(tmp_path / "nope.csv", SCHEMA)


def test_unknown_category_with_prefitted_schema(tmp_path):
    schema = Schema((Column("colour", "categorical", ("a", "b")), Column("amount", "numerical"), Column("label", "label")))
    path = write(tmp_path / "t.csv", "colour,amount,label\na,1,x\nz,2,y\n")
    table = load_csv(path, schema)
    assert len(table) == 1 and table.rejected == 1


def adult_row(income):
    return f"39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, {income}"


def test_adult_format_parses(tmp_path):
    from importlib import resources

    schema = Schema.load(resources.files("mipnn") / "schemas" / "adult.json")
    assert len(schema.attributes) == 14
    assert sum(c.kind == "categorical" for c in schema.attributes) == 8
    path = write(tmp_path / "adult.test", "\n".join([adult_row(">50K."), adult_row("<=50K"), adult_row("?")]) + "\n")
    table = load_csv(path, schema, header=False)
    assert len(table) == 2 and table.dropped == 1
    assert list(table.frame["income"]) == [">50K", "<=50K"]


def raw(frame):
    return RawTable(pd.DataFrame(frame))


def test_one_hot_and_min_max():
    train = raw({"colour": ["a", "b", "c"], "amount": [0.0, 5.0, 10.0], "label": ["x", "y", "x"]})
    enc, _ = fit_encode(train, train, SCHEMA)
    assert enc.feature_names == ("colour=a", "colour=b", "colour=c", "amount")
    np.testing.assert_array_equal(enc.features[1], [0, 1, 0, 0.5])
    np.testing.assert_array_equal(enc.labels, [[1, -1], [-1, 1], [1, -1]])


def test_test_values_are_clipped():
    train = raw({"colour": ["a", "b"], "amount": [0.0, 10.0], "label": ["x", "y"]})
    test = raw({"colour": ["a", "b"], "amount": [12.0, -3.0], "label": ["x", "y"]})
    _, enc = fit_encode(train, test, SCHEMA)
    assert enc.features[0, -1] == 1.0 and enc.features[1, -1] == 0.0


def test_unseen_test_category_is_rejected():
    train = raw({"colour": ["a", "b"], "amount": [0.0, 10.0], "label": ["x", "y"]})
    test = raw({"colour": ["a", "q"], "amount": [1.0, 2.0], "label": ["x", "y"]})
    _, enc = fit_encode(train, test, SCHEMA)
    assert len(enc) == 1 and enc.rejected == 1


def test_constant_column_warns_and_encodes_to_zero():
    train = raw({"colour": ["a", "b"], "amount": [4.0, 4.0], "label": ["x", "y"]})
    with pytest.warns(UserWarning, match="constant"):
        enc, _ = fit_encode(train, train, SCHEMA)
    assert np.all(enc.features[:, -1] == 0)


def test_encoding_invariants(synthetic):
    train, test = synthetic
    widths = sum(len(c.categories) for c in fit_schema(synthetic_tables()[0], SYNTHETIC_SCHEMA).attributes if c.kind == "categorical")
    assert train.n_features == widths + 3
    for data in (train, test):
        assert data.features.min() >= 0 and data.features.max() <= 1
        assert np.all(data.labels.sum(axis=1) == 2 - data.n_classes)


def test_encoding_is_idempotent():
    train, test, schema = synthetic_tables()
    fitted = fit_schema(train, schema)
    a, b = encode(train, fitted), encode(train, fitted)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_subsample(synthetic):
    train, _ = synthetic
    a = subsample(train, 30, seed=5)
    b = subsample(train, 30, seed=5)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, subsample(train, 30, seed=6).features)
    full = subsample(train, len(train), seed=1)
    assert sorted(map(tuple, full.features)) == sorted(map(tuple, train.features))
    with pytest.raises(InputError):
        subsample(train, 0, 1)
    with pytest.raises(InputError):
        subsample(train, len(train) + 1, 1)


def test_subsample_from_large_table_is_reproducible():
    rng = np.random.default_rng(0)
    from mipnn.data import from_arrays

    big = from_arrays(rng.uniform(0, 1, (32560, 2)), rng.integers(0, 2, 32560))
    a, b = subsample(big, 280, 3), subsample(big, 280, 3)
    np.testing.assert_array_equal(a.features, b.features)


def test_encoded_roundtrip(tmp_path, synthetic):
    train, _ = synthetic
    save_encoded(train, tmp_path / "enc")
    back = load_encoded(tmp_path / "enc")
    np.testing.assert_array_equal(back.features, train.features)
    np.testing.assert_array_equal(back.labels, train.labels)
    assert back.class_names == train.class_names and back.feature_names == train.feature_names


def test_schema_validation(tmp_path):
    with pytest.raises(InputError):
        Schema((Column("a", "numerical"),))
    with pytest.raises(InputError):
        Column("a", "categorical", ("x", "x"))
    with pytest.raises(InputError):
        Column("a", "text")
    path = tmp_path / "schema.json"
    path.write_text(json.dumps({"columns": SCHEMA.to_list()}))
    assert Schema.load(path).names == SCHEMA.names


def test_write_synthetic(tmp_path):
    paths = write_synthetic(tmp_path)
    table = load_csv(paths["train"], Schema.load(paths["schema"]))
    assert len(table) == 400


def test_separable_fixture():
    data = make_separable(40, seed=0)
    assert len(data) == 40
    assert np.array_equal(data.target, (data.features.sum(axis=1) > 1).astype(int))
