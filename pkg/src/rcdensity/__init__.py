"""Nonparametric density estimation for random coefficients in ``Y = A0 + A1 X``."""

from rcdensity.errors import RCDensityError
from rcdensity.estimator import EstimatorConfig, EvalPoint, estimate_grid, estimate_point
from rcdensity.kernel import KernelSpec, eval_kernel, make_weight
from rcdensity.transform import Dataset, TransformedDataset, load_csv, to_polar, window
from rcdensity.tuning import lepski_select, select_delta, select_h_known_alpha

__all__ = [
    "Dataset",
    "EstimatorConfig",
    "EvalPoint",
    "KernelSpec",
    "RCDensityError",
    "TransformedDataset",
    "estimate_grid",
    "estimate_point",
    "eval_kernel",
    "load_csv",
    "lepski_select",
    "make_weight",
    "select_delta",
    "select_h_known_alpha",
    "to_polar",
    "window",
]
