from .likelihoods import (
    KnownNoiseLinearRegression,
    LinearRegression,
    LogisticRegression,
    ModelSpec,
    har_design,
    linreg_loglik,
    logistic_loglik,
)
from .priors import PriorSpec, prior_logpdf
from .transforms import (
    CoordinatewiseTransform,
    ParamTransform,
    back_transform_density,
    garch_constraint_map,
    inverse_sigmoid,
    sigmoid_transform,
)
from .volatility import GarchFamily, GarchSpec, GarchTransform, VarianceError, figarch_variance, garch_family_loglik

__all__ = [
    "ModelSpec",
    "LogisticRegression",
    "LinearRegression",
    "KnownNoiseLinearRegression",
    "GarchFamily",
    "GarchSpec",
    "GarchTransform",
    "VarianceError",
    "PriorSpec",
    "ParamTransform",
    "CoordinatewiseTransform",
    "back_transform_density",
    "garch_constraint_map",
    "garch_family_loglik",
    "figarch_variance",
    "har_design",
    "linreg_loglik",
    "logistic_loglik",
    "prior_logpdf",
    "sigmoid_transform",
    "inverse_sigmoid",
]
