import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rareaug.data import FeatureKind
from rareaug.errors import ConfigError, InsufficientMinorityError
from rareaug.smote import (
    NEIGHBOR_VOTE, SmoteConfig, generate_smote, nearest_neighbors, reconstruct, smote_augment, target_count,
)

from conftest import make_dataset
from oracles import knn_brute


def test_reference_counts():
    n = target_count(95, 12783)
    assert n == 5056
    rng = np.random.default_rng(0)
    batch = generate_smote(rng.normal(size=(95, 5)), None, SmoteConfig(n, 5, 0))
    assert batch.n_rows == 5056
    total = 95 + batch.n_rows
    assert total == 5151 and abs(total / 12783 - 0.4) <= 0.01


@given(st.integers(1, 5000), st.integers(1, 50000), st.floats(0.01, 1.0))
def test_target_count_reaches_ratio_from_below(n_min, n_maj, ratio):
    c = target_count(n_min, n_maj, ratio)
    assert c >= 0
    if c > 0:
        assert (n_min + c) / n_maj <= ratio + 1e-9
        assert (n_min + c + 1) / n_maj > ratio - 1e-9


def test_identical_points_give_that_point():
    R = np.array([[1.5, -2.0], [1.5, -2.0]])
    b = generate_smote(R, None, SmoteConfig(20, 1, 3))
    assert np.all(b.X == R[0])


def test_two_d_geometry_against_brute_force():
    rng = np.random.default_rng(4)
    R = rng.normal(size=(10, 2))
    b = generate_smote(R, None, SmoteConfig(200, 3, 9))
    assert np.max(np.abs(b.X - reconstruct(b, R))) <= 1e-9
    for base, nbr in zip(b.base_index, b.neighbor_index):
        assert nbr in knn_brute(R, base, 3)
    assert np.all((b.lam >= 0) & (b.lam < 1))


def test_knn_matches_brute_force_with_ties():
    Z = np.array([[0.0], [1.0], [-1.0], [2.0], [0.0]])
    nb = nearest_neighbors(Z, 2)
    assert nb[0].tolist() == [4, 1]  # distance 0 first, then the lower index at distance 1
    rng = np.random.default_rng(1)
    Z = rng.integers(0, 3, size=(40, 3)).astype(float)
    nb = nearest_neighbors(Z, 4)
    for i in range(40):
        assert set(nb[i]) <= knn_brute(Z, i, 4) and i not in nb[i]


def test_round_robin_allocation():
    R = np.random.default_rng(0).normal(size=(7, 3))
    b = generate_smote(R, None, SmoteConfig(23, 2, 1))
    counts = np.bincount(b.base_index, minlength=7)
    assert counts.sum() == 23 and counts.max() - counts.min() <= 1


def test_determinism_per_seed():
    R = np.random.default_rng(0).normal(size=(12, 4))
    a = generate_smote(R, None, SmoteConfig(50, 3, 7))
    b = generate_smote(R, None, SmoteConfig(50, 3, 7))
    c = generate_smote(R, None, SmoteConfig(50, 3, 8))
    assert np.array_equal(a.X, b.X) and not np.array_equal(a.X, c.X)


def test_binary_rounded_and_categorical_policies():
    rng = np.random.default_rng(2)
    R = np.c_[rng.normal(size=30), rng.integers(0, 2, 30), rng.integers(0, 4, 30)]
    kinds = [FeatureKind.continuous(), FeatureKind.binary(), FeatureKind.categorical(4)]
    b = generate_smote(R, kinds, SmoteConfig(90, 3, 0))
    assert set(np.unique(b.X[:, 1])) <= {0.0, 1.0}
    assert np.array_equal(b.X[:, 2], R[b.base_index, 2])
    v = generate_smote(R, kinds, SmoteConfig(90, 3, 0, NEIGHBOR_VOTE))
    # categorical column never enters the distance: same neighbours either way
    assert np.array_equal(v.neighbor_index, b.neighbor_index)
    assert set(np.unique(v.X[:, 2])) <= set(np.unique(R[:, 2]))


def test_categorical_excluded_from_metric():
    R = np.array([[0.0, 0], [0.1, 3], [5.0, 0], [5.1, 3]])
    kinds = [FeatureKind.continuous(), FeatureKind.categorical(4)]
    b = generate_smote(R, kinds, SmoteConfig(8, 1, 0))
    pairs = {(int(a), int(n)) for a, n in zip(b.base_index, b.neighbor_index)}
    assert pairs <= {(0, 1), (1, 0), (2, 3), (3, 2)}


def test_k_clipped_with_warning_and_errors():
    R = np.random.default_rng(0).normal(size=(3, 2))
    with pytest.warns(UserWarning):
        b = generate_smote(R, None, SmoteConfig(5, 5, 0))
    assert b.extra["k"] == 2
    with pytest.raises(InsufficientMinorityError):
        generate_smote(R[:1], None, SmoteConfig(5, 1, 0))
    with pytest.raises(ConfigError):
        SmoteConfig(0)
    with pytest.raises(ConfigError):
        SmoteConfig(5, categorical_policy="mode")


def test_provenance_and_augment(tmp_path):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 3))
    y = np.r_[np.ones(10), np.zeros(50)]
    ds = make_dataset(X, y)
    batch, aug = smote_augment(ds, SmoteConfig(15, 3, 1))
    assert aug.row_count == 75 and aug.class_counts() == (50, 25)
    assert np.all(aug.row_ids[60:] == -1)
    batch.write(ds.columns, tmp_path / "s.csv", tmp_path / "p.json")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["n_rows"] == 15 and len(doc["records"]) == 15
    rec = doc["records"][0]
    assert {"base_index", "neighbor_index", "lambda"} <= set(rec)
    assert doc["source_row_ids"] == list(range(10))


@given(st.integers(2, 30), st.integers(1, 8), st.integers(1, 120), st.integers(0, 2**31 - 1))
def test_rows_lie_on_recorded_segments(m, d, n, seed):
    R = np.random.default_rng(seed).normal(size=(m, d))
    b = generate_smote(R, None, SmoteConfig(n, min(5, m - 1), seed))
    assert b.n_rows == n
    assert np.max(np.abs(b.X - reconstruct(b, R))) <= 1e-9
    # every synthetic row is inside the bounding box of the minority rows
    assert np.all(b.X >= R.min(0) - 1e-12) and np.all(b.X <= R.max(0) + 1e-12)
