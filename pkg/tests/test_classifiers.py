import json

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rareaug.classifiers import (
    ForestModel, LogisticModel, OneHotLayout, TrainConfig, TreeModel, fit_forest, fit_logistic, fit_model,
    fit_tree, gini, load_model, model_from_dict, model_to_dict, predict_label, predict_proba, save_model, sigmoid,
)
from rareaug.classifiers.logistic import logistic_loss
from rareaug.data import BenchmarkSpec, apply_scaler, fit_scaler, make_benchmark, split
from rareaug.errors import ConfigError, DomainError, SchemaError
from rareaug.metrics import evaluate

from conftest import make_dataset, shifted_blobs
from oracles import best_root_split, gini_counts


# -- sigmoid ---------------------------------------------------------------------

def test_sigmoid_at_zero():
    assert sigmoid(0.0) == 0.5


def test_sigmoid_matches_high_precision():
    mpmath.mp.dps = 50
    want = 1 / (1 + mpmath.e ** -2)
    assert abs(sigmoid(2.0) - float(want)) < 1e-15
    assert str(sigmoid(2.0)).startswith("0.880797")


@given(st.floats(-700, 700))
def test_sigmoid_symmetry(x):
    assert abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15


def test_sigmoid_extremes_do_not_overflow():
    with np.errstate(over="raise", invalid="raise"):
        v = sigmoid(np.array([-1e4, 1e4]))
    assert v[0] == 0.0 and v[1] == 1.0


# -- gini ---------------------------------------------------------------------------

@pytest.mark.parametrize("counts,want", [((5, 5), 0.5), ((10, 0), 0.0), ((3, 1), 0.375)])
def test_gini_values(counts, want):
    assert gini(counts) == pytest.approx(want, abs=1e-15)


@given(st.integers(0, 1000), st.integers(1, 1000))
def test_gini_range(a, b):
    g = gini((a, b))
    assert 0.0 <= g <= 0.5
    assert g == pytest.approx(gini_counts(a, b), abs=1e-12)


# -- logistic --------------------------------------------------------------------------

def test_logistic_separable_toy():
    X = np.r_[np.full(50, -1.0), np.full(50, 1.0)]
    y = np.r_[np.zeros(50), np.ones(50)]
    m = fit_logistic(make_dataset(X, y))
    assert np.mean(m.predict(X[:, None]) == y) == 1.0


def _numeric_grad(Z, y, w, b, l2, h=1e-6):
    g = np.zeros(len(w) + 1)
    for k in range(len(w) + 1):
        e = np.zeros(len(w) + 1)
        e[k] = h
        up = logistic_loss(Z, y, w + e[:-1], b + e[-1], l2)
        dn = logistic_loss(Z, y, w - e[:-1], b - e[-1], l2)
        g[k] = (up - dn) / (2 * h)
    return g


def test_logistic_gradient_small_at_returned_weights():
    ds = make_benchmark(BenchmarkSpec(n_rows=200, n_positives=40, seed=1))
    ds = apply_scaler(ds, fit_scaler(ds))
    cfg = TrainConfig(epochs=50000, tol=1e-4, learning_rate=0.5)
    m = fit_logistic(ds, cfg)
    Z = m.layout.expand(ds.X)
    g = _numeric_grad(Z, ds.y.astype(float), m.weights, m.bias, cfg.l2)
    assert np.max(np.abs(g)) <= 1e-3


def test_logistic_zero_model_predicts_half_and_zero():
    m = LogisticModel(np.zeros(3), 0.0, OneHotLayout([0, 0, 0]))
    X = np.random.default_rng(0).normal(size=(20, 3))
    assert np.all(predict_proba(m, X) == 0.5) and np.all(predict_label(m, X) == 0)


def test_logistic_proba_equals_dot_product_oracle():
    rng = np.random.default_rng(2)
    w, b = rng.normal(size=4), 0.3
    m = LogisticModel(w, b, OneHotLayout([0, 0, 0, 0]))
    X = rng.normal(size=(30, 4))
    want = [1.0 / (1.0 + np.exp(-(float(np.dot(w, x)) + b))) for x in X]
    assert np.max(np.abs(m.predict_proba(X) - want)) <= 1e-12


@given(st.floats(-5, 5), st.floats(0.0, 3.0))
def test_logistic_monotone_in_positive_weight(x0, dx):
    m = LogisticModel(np.array([1.5, -0.5]), 0.1, OneHotLayout([0, 0]))
    lo = m.predict_proba(np.array([[x0, 0.2]]))[0]
    hi = m.predict_proba(np.array([[x0 + dx, 0.2]]))[0]
    assert hi >= lo


def test_logistic_one_hot_categorical():
    rng = np.random.default_rng(0)
    code = rng.integers(0, 3, 300)
    y = (code == 2).astype(int)
    m = fit_logistic(make_dataset(code, y, [3]), TrainConfig(epochs=3000, learning_rate=1.0))
    assert m.weights.shape == (3,)
    assert np.mean(m.predict(code[:, None].astype(float)) == y) == 1.0


def test_logistic_needs_both_classes():
    with pytest.raises(DomainError):
        fit_logistic(make_dataset([[1.0], [2.0]], [0, 0]))


def test_logistic_poor_minority_recall_on_raw_benchmark():
    recalls = []
    for seed in range(5):
        ds = make_benchmark(BenchmarkSpec(seed=seed))
        pair = split(ds, 0.3, seed)
        sc = fit_scaler(pair.train)
        m = fit_logistic(apply_scaler(pair.train, sc))
        recalls.append(evaluate(m.predict(apply_scaler(pair.test, sc).X), pair.test.y).class1.recall)
    assert np.median(recalls) < 0.3


def test_logistic_recall_near_chance_without_signal():
    recalls = []
    for seed in range(5):
        ds = make_benchmark(BenchmarkSpec(n_rows=6000, n_positives=300, class_separation=0.0, seed=seed))
        pair = split(ds, 0.3, seed)
        sc = fit_scaler(pair.train)
        m = fit_logistic(apply_scaler(pair.train, sc))
        recalls.append(evaluate(m.predict(apply_scaler(pair.test, sc).X), pair.test.y).class1.recall)
    # a guesser at the 5% base rate would recall about 0.05
    assert np.median(recalls) <= 0.1


# -- tree -------------------------------------------------------------------------------

def test_pure_input_is_single_leaf():
    m = fit_tree(make_dataset(np.arange(10.0), np.ones(10)))
    assert m.n_nodes == 1 and np.all(m.predict(np.arange(10.0)[:, None]) == 1)


def test_one_dimensional_split_threshold():
    X = np.r_[np.linspace(-3, -0.5, 20), np.linspace(0.25, 2, 20)]
    y = np.r_[np.zeros(20), np.ones(20)]
    m = fit_tree(make_dataset(X, y))
    assert m.feature[0] == 0 and -0.5 < m.threshold[0] < 0.25
    assert np.all(m.predict(X[:, None]) == y)


def test_root_split_matches_exhaustive_search():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(30, 4))
        y = rng.integers(0, 2, 30)
        m = fit_tree(make_dataset(X, y), TrainConfig(min_leaf_size=1))
        l, r = m.left[0], m.right[0]
        n = 30
        parent = gini((m.count0[0], m.count1[0]))
        child = ((m.count0[l] + m.count1[l]) * gini((m.count0[l], m.count1[l]))
                 + (m.count0[r] + m.count1[r]) * gini((m.count0[r], m.count1[r]))) / n
        assert parent - child == pytest.approx(best_root_split(X, y), abs=1e-12)


def test_tree_categorical_split():
    code = np.tile(np.arange(4), 25).astype(float)
    y = (code == 3).astype(int)
    m = fit_tree(make_dataset(code, y, [4]))
    assert np.all(m.predict(code[:, None]) == y)


def test_tree_respects_depth_and_leaf_size():
    ds = shifted_blobs(n=300, seed=4)
    m = fit_tree(ds, TrainConfig(max_depth=3, min_leaf_size=10))
    assert m.depth() <= 3
    sizes = (m.count0 + m.count1)[m.left < 0]
    assert sizes.min() >= 10


def test_tree_feature_subset():
    ds = shifted_blobs(seed=1)
    m = fit_tree(ds, feature_subset=[1, 2])
    used = set(m.feature[m.left >= 0].tolist())
    assert used <= {1, 2}


# -- forest --------------------------------------------------------------------------------

def test_single_tree_forest_equals_its_tree():
    ds = shifted_blobs(seed=2)
    f = fit_forest(ds, TrainConfig(n_trees=1, seed=3))
    assert np.array_equal(f.predict(ds.X), f.trees[0].predict(ds.X))


def test_forest_vote_identity():
    ds = shifted_blobs(seed=3)
    f = fit_forest(ds, TrainConfig(n_trees=9, seed=1))
    votes = np.array([t.predict(ds.X) for t in f.trees])
    mode = np.array([1 if np.sum(col) > len(col) / 2 else 0 for col in votes.T])
    assert np.array_equal(f.predict(ds.X), mode)


def test_forest_seeded_and_thread_independent():
    ds = shifted_blobs(seed=5)
    cfg = TrainConfig(n_trees=6, seed=11)
    a = fit_forest(ds, cfg)
    b = fit_forest(ds, cfg, n_jobs=3)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = fit_forest(ds, TrainConfig(n_trees=6, seed=12))
    assert json.dumps(a.to_dict()) != json.dumps(c.to_dict())


def test_forest_raw_benchmark_recall_shape():
    recalls = []
    for seed in range(5):
        ds = make_benchmark(BenchmarkSpec(seed=seed))
        pair = split(ds, 0.3, seed)
        sc = fit_scaler(pair.train)
        f = fit_forest(apply_scaler(pair.train, sc), TrainConfig(seed=seed))
        s = evaluate(f.predict(apply_scaler(pair.test, sc).X), pair.test.y)
        recalls.append((s.class0.recall, s.class1.recall))
    r0, r1 = np.median(recalls, axis=0)
    assert r0 >= 0.98 and r1 < 0.7


# -- serialisation ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["dt", "rf", "lr"])
def test_model_round_trip(kind, tmp_path):
    rng = np.random.default_rng(0)
    X = np.c_[rng.normal(size=200), rng.integers(0, 3, 200), rng.integers(0, 2, 200)]
    y = ((X[:, 0] > 0.3) | (X[:, 1] == 2)).astype(int)
    ds = make_dataset(X, y, ["c", 3, "b"])
    m = fit_model(kind, ds, TrainConfig(n_trees=5, seed=4))
    p = tmp_path / "m.json"
    save_model(m, p, extra={"note": "x"})
    back, doc = load_model(p)
    assert doc["note"] == "x" and doc["kind"] == kind
    assert np.array_equal(back.predict(X), m.predict(X))
    assert np.allclose(back.predict_proba(X), m.predict_proba(X), atol=0, rtol=0)


def test_model_document_checks():
    m = fit_tree(shifted_blobs())
    doc = model_to_dict(m)
    assert doc["format"] == "rareaug-model" and doc["version"] == 1
    assert "root" in doc["model"] and "left" in doc["model"]["root"]
    with pytest.raises(SchemaError):
        model_from_dict({**doc, "version": 99})
    with pytest.raises(SchemaError):
        model_from_dict({**doc, "kind": "svm"})


def test_unknown_model_kind():
    with pytest.raises(ConfigError):
        fit_model("svm", shifted_blobs())


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1.0)


def test_stochastic_flags():
    ds = shifted_blobs()
    assert not fit_tree(ds).stochastic and not fit_logistic(ds).stochastic
    assert fit_forest(ds, TrainConfig(n_trees=2)).stochastic
    assert isinstance(fit_model("rf", ds, TrainConfig(n_trees=2)), ForestModel)
    assert isinstance(fit_model("dt", ds), TreeModel)
