"""Decision tree, random forest and logistic regression classifiers."""

import json

from ..errors import ConfigError, SchemaError
from .forest import ForestModel, fit_forest, forest_predict, tree_seed
from .logistic import LogisticModel, OneHotLayout, fit_logistic, predict_label, predict_proba, sigmoid
from .tree import TrainConfig, TreeModel, fit_tree, gini

MODEL_KINDS = ("rf", "dt", "lr")  # also the tie-break order for model selection
MODEL_FORMAT = "rareaug-model"
MODEL_VERSION = 1

_CLASSES = {"dt": TreeModel, "rf": ForestModel, "lr": LogisticModel}


def fit_model(kind, train, cfg=None, n_jobs=1):
    cfg = cfg or TrainConfig()
    if kind == "dt":
        return fit_tree(train, cfg)
    if kind == "rf":
        return fit_forest(train, cfg, n_jobs=n_jobs)
    if kind == "lr":
        return fit_logistic(train, cfg)
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def model_to_dict(model, extra=None):
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": model.kind, "model": model.to_dict()}
    if extra:
        doc.update(extra)
    return doc


def model_from_dict(doc):
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaError("not a rareaug model document")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported model version {doc.get('version')!r}")
    try:
        cls = _CLASSES[doc["kind"]]
    except KeyError:
        raise SchemaError(f"unknown model kind {doc.get('kind')!r}") from None
    return cls.from_dict(doc["model"])


def save_model(model, path, extra=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, extra), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc


__all__ = [
    "ForestModel", "LogisticModel", "MODEL_KINDS", "OneHotLayout", "TrainConfig", "TreeModel",
    "fit_forest", "fit_logistic", "fit_model", "fit_tree", "forest_predict", "gini", "load_model",
    "model_from_dict", "model_to_dict", "predict_label", "predict_proba", "save_model", "sigmoid",
    "tree_seed",
]
