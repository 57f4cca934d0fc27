import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rareaug.data import (
    BINARY, CATEGORICAL, CONTINUOUS, LABEL, BenchmarkSpec, ColumnSchema, FeatureKind,
    apply_scaler, fit_scaler, infer_schema, invert_scaler, load_csv, make_benchmark, make_toy,
    read_schema_sidecar, split, write_csv, write_schema_sidecar,
)
from rareaug.errors import ConfigError, ParseError, SchemaError

from conftest import make_dataset


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- schema inference --------------------------------------------------------

def test_infer_binary_label_and_continuous():
    cols = infer_schema(["y", "x1"], [[0, 0.3], [1, -1.2], [0, 4.4]])
    assert cols[0].role == LABEL and cols[0].kind.kind == BINARY
    assert cols[1].kind.kind == CONTINUOUS


def test_infer_ten_integer_levels_is_categorical():
    rows = [[i % 2, i % 10] for i in range(200)]
    cols = infer_schema(["y", "x1"], rows)
    assert cols[1].kind == FeatureKind.categorical(10)


def test_infer_noncontiguous_codes_get_level_table():
    rows = [[0, v] for v in (3, 7, 11, 7, 3)]
    kind = infer_schema(["y", "x1"], rows)[1].kind
    assert kind.kind == CATEGORICAL and kind.levels == (3.0, 7.0, 11.0)


def test_infer_too_many_levels_is_continuous():
    rows = [[0, float(i)] for i in range(40)]
    assert infer_schema(["y", "x1"], rows)[1].kind.kind == CONTINUOUS


def test_infer_rejects_nonbinary_label_and_duplicates():
    with pytest.raises(SchemaError):
        infer_schema(["y", "x1"], [[2, 0.1], [0, 0.2]])
    with pytest.raises(SchemaError):
        infer_schema(["y", "y"], [[0, 1]])
    with pytest.raises(SchemaError):
        infer_schema(["x1", "x2"], [[0.5, 0.1]])


def test_mill_shaped_header_types():
    # 62 columns shaped like the mill file: x28 categorical, x61 binary
    rng = np.random.default_rng(0)
    n = 300
    header = ["y"] + [f"x{j}" for j in range(1, 62)]
    data = rng.normal(size=(n, 62))
    data[:, 0] = rng.random(n) < 0.05
    data[:, 28] = rng.integers(0, 8, n)
    data[:, 61] = rng.random(n) < 0.3
    cols = {c.name: c.kind.kind for c in infer_schema(header, data.tolist())}
    assert cols["x28"] == CATEGORICAL and cols["x61"] == BINARY
    assert sum(k == CONTINUOUS for k in cols.values()) == 59


# -- csv io --------------------------------------------------------------------

def test_load_header_only_gives_empty_dataset(tmp_path):
    ds = load_csv(_write(tmp_path, "y,x1,x2\n"))
    assert ds.row_count == 0 and ds.n_features == 2


def test_load_letter_in_numeric_column_names_row_and_column(tmp_path):
    p = _write(tmp_path, "y,x1,x2\n0,1.0,2\n1,abc,3\n")
    with pytest.raises(ParseError) as exc:
        load_csv(p)
    assert exc.value.row == 2 and exc.value.column == "x1"
    assert "row 2" in str(exc.value) and "'x1'" in str(exc.value)


def test_load_ragged_row(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "y,x1\n0,1\n1\n"))


def test_load_missing_file_is_data_error(tmp_path):
    from rareaug.errors import DataError
    with pytest.raises(DataError):
        load_csv(tmp_path / "missing.csv")


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    X = np.c_[rng.normal(size=50) * 1e3, rng.integers(0, 4, 50), rng.integers(0, 2, 50)]
    ds = make_dataset(X, rng.integers(0, 2, 50), ["c", 4, "b"])
    p = tmp_path / "rt.csv"
    write_csv(ds, p)
    back = load_csv(p, schema=list(ds.columns))
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)


def test_level_table_round_trip(tmp_path):
    p = _write(tmp_path, "y,x1\n0,3\n1,7\n0,11\n")
    ds = load_csv(p)
    assert ds.X[:, 0].tolist() == [0, 1, 2]
    out = tmp_path / "o.csv"
    write_csv(ds, out)
    assert out.read_text().splitlines()[1:] == ["0,3", "1,7", "0,11"]


def test_schema_sidecar_round_trip(tmp_path):
    ds = make_dataset(np.c_[np.arange(6.0), np.arange(6) % 3], [0, 1] * 3, ["c", 3])
    p = tmp_path / "s.json"
    write_schema_sidecar(ds.columns, p)
    assert read_schema_sidecar(p) == list(ds.columns)
    assert json.loads(p.read_text())["x2"]["cardinality"] == 3


def test_schema_mismatch_rejected(tmp_path):
    p = _write(tmp_path, "y,x1\n0,1.5\n")
    wrong = [ColumnSchema("y", FeatureKind.binary(), LABEL), ColumnSchema("z", FeatureKind.continuous())]
    with pytest.raises(SchemaError):
        load_csv(p, schema=wrong)


def test_dataset_is_read_only():
    ds = make_dataset([[1.0], [2.0]], [0, 1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5.0


def test_categorical_code_out_of_range():
    with pytest.raises(SchemaError):
        make_dataset([[0], [3]], [0, 1], [3])


# -- split -----------------------------------------------------------------------

def _label_only(n, n_pos):
    y = np.zeros(n, np.int64)
    y[:n_pos] = 1
    return make_dataset(np.zeros((n, 1)), y)


def test_split_mill_counts():
    ds = _label_only(18398, 124)
    pair = split(ds, 0.3, seed=0)
    assert pair.test.class_counts()[1] == 37  # round(0.3 * 124)
    assert pair.test.row_count in (5519, 5520)
    assert pair.train.row_count + pair.test.row_count == 18398


def test_split_two_rows_one_each_side():
    pair = split(make_dataset([[0.0], [1.0]], [0, 1]), 0.5, seed=4)
    assert pair.train.row_count == 1 and pair.test.row_count == 1


def test_split_same_seed_same_partition():
    ds = _label_only(500, 40)
    a, b = split(ds, 0.3, 11), split(ds, 0.3, 11)
    assert np.array_equal(a.test.row_ids, b.test.row_ids)
    assert not np.array_equal(a.test.row_ids, split(ds, 0.3, 12).test.row_ids)


@given(st.integers(2, 300), st.integers(0, 300), st.floats(0.05, 0.95), st.integers(0, 2**16))
def test_split_partitions_rows(n, n_pos, frac, seed):
    n_pos = min(n_pos, n)
    ds = _label_only(n, n_pos)
    pair = split(ds, frac, seed)
    ids = np.concatenate([pair.train.row_ids, pair.test.row_ids])
    assert sorted(ids.tolist()) == list(range(n))
    for c, count in enumerate(ds.class_counts()):
        got = pair.test.class_counts()[c]
        assert abs(got - frac * count) <= 1.0 + 1e-9
    assert pair.train.row_count >= 1 and pair.test.row_count >= 1


def test_split_rejects_bad_fraction():
    with pytest.raises(ConfigError):
        split(_label_only(10, 2), 1.0)


# -- scaler -----------------------------------------------------------------------

def test_constant_column_scales_to_zero():
    ds = make_dataset(np.full((5, 1), 5.0), [0, 1, 0, 1, 0])
    assert np.all(apply_scaler(ds, fit_scaler(ds)).X == 0.0)


def test_symmetric_pair_is_unit_scaled():
    ds = make_dataset([[-1.0], [1.0]], [0, 1])
    p = fit_scaler(ds)
    assert p.mean[0] == 0.0 and p.std[0] == 1.0


def test_scaler_matches_two_pass_oracle():
    rng = np.random.default_rng(5)
    v = rng.normal(7.0, 3.0, 1000)
    ds = make_dataset(v, rng.integers(0, 2, 1000))
    z = apply_scaler(ds, fit_scaler(ds)).X[:, 0]
    # independent two-pass mean / population variance
    mean = sum(v) / len(v)
    var = sum((x - mean) ** 2 for x in v) / len(v)
    assert abs(fit_scaler(ds).mean[0] - mean) <= 1e-9
    assert abs(fit_scaler(ds).std[0] - var ** 0.5) <= 1e-9
    assert abs(z.mean()) <= 1e-9 and abs(z.std() - 1.0) <= 1e-9


def test_scaler_leaves_discrete_columns_alone_and_inverts():
    rng = np.random.default_rng(1)
    X = np.c_[rng.normal(3, 2, 40), rng.integers(0, 3, 40), rng.integers(0, 2, 40)]
    ds = make_dataset(X, rng.integers(0, 2, 40), ["c", 3, "b"])
    p = fit_scaler(ds)
    Z = apply_scaler(ds, p).X
    assert np.array_equal(Z[:, 1:], X[:, 1:])
    assert np.allclose(invert_scaler(Z, p), X, atol=1e-12)


# -- benchmark & toy ----------------------------------------------------------------

def test_benchmark_counts_and_layout():
    ds = make_benchmark(BenchmarkSpec(seed=3))
    assert ds.row_count == 18398 and ds.class_counts() == (18274, 124)
    kinds = [c.kind.kind for c in ds.feature_columns]
    assert kinds.count(CONTINUOUS) == 59 and kinds[59] == CATEGORICAL and kinds[60] == BINARY
    assert len(ds.informative) == 3


def test_benchmark_mean_gap_matches_separation():
    gaps = []
    for seed in range(3):
        ds = make_benchmark(BenchmarkSpec(n_rows=40000, n_positives=4000, class_separation=3.0, seed=seed))
        for j in ds.informative:
            gaps.append(ds.X[ds.y == 1, j].mean() - ds.X[ds.y == 0, j].mean())
    assert np.all(np.abs(np.array(gaps) - 3.0) <= 0.2)


def test_benchmark_is_seed_deterministic():
    a = make_benchmark(BenchmarkSpec(n_rows=500, n_positives=20, seed=9))
    b = make_benchmark(BenchmarkSpec(n_rows=500, n_positives=20, seed=9))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.informative, b.informative)


def test_toy_shape():
    ds = make_toy(seed=2)
    assert ds.row_count == 5000 and ds.n_features == 2
    assert 0.03 < ds.y.mean() < 0.07
    x1 = ds.X[:, 0]
    assert abs(np.mean(x1 < 0) - 0.5) < 0.03 and abs(np.median(np.abs(x1)) - 5.0) < 0.2
