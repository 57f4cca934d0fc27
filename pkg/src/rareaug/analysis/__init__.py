"""Lasso feature screening and Shapley attributions."""

from .lasso import (
    FeatureSelection, LassoConfig, fit_lasso_logistic, lambda_grid, lambda_max, lasso_path,
    select_lambda, soft_threshold, tuned_lasso,
)
from .shapley import (
    Attribution, GlobalImportance, global_importance, shapley_attribution, stratified_background,
    write_importance_csv, write_importance_json,
)

__all__ = [
    "Attribution", "FeatureSelection", "GlobalImportance", "LassoConfig", "fit_lasso_logistic",
    "global_importance", "lambda_grid", "lambda_max", "lasso_path", "select_lambda",
    "shapley_attribution", "soft_threshold", "stratified_background", "tuned_lasso",
    "write_importance_csv", "write_importance_json",
]
