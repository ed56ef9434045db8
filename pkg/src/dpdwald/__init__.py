"""Minimum density power divergence estimation and robust Wald-type tests."""

from dpdwald.errors import (
    ConvergenceError,
    DegenerateSampleError,
    DomainError,
    InputError,
    MatrixError,
    NumericError,
    QuadratureError,
    RestrictionError,
)
from dpdwald.models import EXPONENTIAL, NORMAL, WEIBULL, ModelFamily, get_family
from dpdwald.estimation import MdpdeFit, dpd_objective, estimating_residual, fit_mdpde
from dpdwald.wald import (
    Restriction,
    WaldTestResult,
    composite_wald,
    exp_simple_wald,
    normal_mean_wald,
    signed_wald,
    simple_wald,
    weibull_scale_wald,
)
from dpdwald.power import (
    PowerQuery,
    PowerResult,
    approx_power_simple,
    composite_power_approx,
    contiguous_power_composite,
    contiguous_power_simple,
    l_quadratic,
    required_sample_size,
)
from dpdwald.tuning import TuningResult, select_beta
from dpdwald.simulation import McReport, McScenario, MixtureSpec, run_scenario, sample_mixture
from dpdwald.datasets import NamedDataset, load_dataset
from dpdwald.analyses import AnalysisRun, run_example

__all__ = [
    "ConvergenceError",
    "DegenerateSampleError",
    "DomainError",
    "InputError",
    "MatrixError",
    "NumericError",
    "QuadratureError",
    "RestrictionError",
    "EXPONENTIAL",
    "NORMAL",
    "WEIBULL",
    "ModelFamily",
    "get_family",
    "MdpdeFit",
    "dpd_objective",
    "estimating_residual",
    "fit_mdpde",
    "Restriction",
    "WaldTestResult",
    "composite_wald",
    "exp_simple_wald",
    "normal_mean_wald",
    "signed_wald",
    "simple_wald",
    "weibull_scale_wald",
    "PowerQuery",
    "PowerResult",
    "approx_power_simple",
    "composite_power_approx",
    "contiguous_power_composite",
    "contiguous_power_simple",
    "l_quadratic",
    "required_sample_size",
    "TuningResult",
    "select_beta",
    "McReport",
    "McScenario",
    "MixtureSpec",
    "run_scenario",
    "sample_mixture",
    "NamedDataset",
    "load_dataset",
    "AnalysisRun",
    "run_example",
]

__version__ = "0.1.0"
