from .base import (DEFAULTS, DEFAULTS_VERSION, RegressorSpec, RegressorModel,
                   make_spec, fit_model, predict, model_from_dict)
from .linear import fit_ols, fit_elastic_net, ridge_regression
from .tree import fit_random_forest, fit_gbt
from .mlp import fit_mlp
from .svr import fit_svr
from .tuning import grid_search_cv, fit_stack

__all__ = [
    "DEFAULTS", "DEFAULTS_VERSION", "RegressorSpec", "RegressorModel",
    "make_spec", "fit_model", "predict", "model_from_dict",
    "fit_ols", "fit_elastic_net", "ridge_regression",
    "fit_random_forest", "fit_gbt", "fit_mlp", "fit_svr",
    "grid_search_cv", "fit_stack",
]
