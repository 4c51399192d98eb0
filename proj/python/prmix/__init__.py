"""Predictive recursion for nonparametric mixture estimation."""

from ._core import (
    Error,
    __version__,
    fit,
    normal_quantile,
    npmle,
    predict,
    prml,
    regress,
    scenarios,
    simulate,
    twogroups,
    weight,
)

__all__ = [
    "Error",
    "__version__",
    "fit",
    "normal_quantile",
    "npmle",
    "predict",
    "prml",
    "regress",
    "scenarios",
    "simulate",
    "twogroups",
    "weight",
]
