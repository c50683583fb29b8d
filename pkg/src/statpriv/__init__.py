"""Summary-statistic privacy: quantization release mechanisms, mechanism
synthesis by dynamic programming, and analytic/Monte-Carlo privacy and
distortion evaluation for parametric data distributions.
"""

from statpriv.analysis import (
    AnalysisConfig,
    AnalyticValue,
    BoundReport,
    McPrivacy,
    analytic_distortion,
    analytic_privacy,
    distortion_lower_bound,
    empirical_distortion,
    gamma,
    max_density_bound,
    max_window_fraction,
    mc_privacy,
    privacy_lower_bound,
    relaxed_bounds,
    surrogate_distortion,
    surrogate_privacy,
)
from statpriv.errors import (
    ConfigError,
    DomainError,
    FitError,
    InfeasibleError,
    UnsupportedError,
)
from statpriv.mechanisms import (
    BaselineMechanism,
    QuantizationMechanism,
    TableBin,
    params_from_dict,
    params_to_dict,
    release_baseline,
    release_dataset,
)
from statpriv.model import (
    FAMILY_TAGS,
    Binomial,
    Categorical,
    Exponential,
    Gaussian,
    Geometric,
    LipschitzDescriptor,
    LipschitzParam,
    Poisson,
    Secret,
    ShiftedExponential,
    Uniform,
    UniformBox,
    UniformSimplex,
    aux_distance,
    family_class,
    fit_params,
    sample,
    secret_range,
    secret_value,
    tv_distance,
    wasserstein1,
)
from statpriv.optimizer import (
    BinRow,
    BinTable,
    GridProblem,
    bin_distortion,
    bin_privacy,
    binary_search_mechanism,
    dp_optimize,
    greedy_optimize,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "AnalyticValue",
    "BaselineMechanism",
    "BinRow",
    "BinTable",
    "Binomial",
    "BoundReport",
    "Categorical",
    "ConfigError",
    "DomainError",
    "Exponential",
    "FAMILY_TAGS",
    "FitError",
    "Gaussian",
    "Geometric",
    "GridProblem",
    "InfeasibleError",
    "LipschitzDescriptor",
    "LipschitzParam",
    "McPrivacy",
    "Poisson",
    "QuantizationMechanism",
    "Secret",
    "ShiftedExponential",
    "TableBin",
    "Uniform",
    "UniformBox",
    "UniformSimplex",
    "UnsupportedError",
    "__version__",
    "analytic_distortion",
    "analytic_privacy",
    "aux_distance",
    "bin_distortion",
    "bin_privacy",
    "binary_search_mechanism",
    "distortion_lower_bound",
    "dp_optimize",
    "empirical_distortion",
    "family_class",
    "fit_params",
    "gamma",
    "greedy_optimize",
    "max_density_bound",
    "max_window_fraction",
    "mc_privacy",
    "params_from_dict",
    "params_to_dict",
    "privacy_lower_bound",
    "relaxed_bounds",
    "release_baseline",
    "release_dataset",
    "sample",
    "secret_range",
    "secret_value",
    "surrogate_distortion",
    "surrogate_privacy",
    "tv_distance",
    "wasserstein1",
]
