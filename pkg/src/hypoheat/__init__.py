"""Small-time heat kernel asymptotics for hypoelliptic linear diffusions.

The library analyzes dx = (A x + alpha) dt + B dw: controllability
filtration and anisotropic scaling data, minimum-energy optimal control,
Laurent data of the inverse-Gramian family, the exact Gaussian transition
density, its small-time expansions in three regimes, and a Monte Carlo
validator for the transition moments.
"""

from .control import (
    Extremal,
    connecting_covector,
    extremal,
    extremal_flow,
    geodesic_cost,
    value_function,
)
from .curvature import (
    CurvatureExpansion,
    OracleFit,
    finite_difference_oracle,
    laurent_expansion,
    q_of_t,
)
from .errors import (
    DimensionMismatch,
    ExtrapolationUnstable,
    FitIllConditioned,
    HypoheatError,
    IllConditionedWarning,
    InvalidConfig,
    NonFinite,
    NonPositiveTime,
    NotControllable,
    RankDeficientB,
    SeriesDegenerate,
    TooFewSamples,
)
from .gramian import (
    DEFAULT_ORDER,
    SMALL_TIME,
    GramianSeries,
    covariance,
    covariance_logdet,
    det_covariance_expansion,
    flow_integral,
    gram_logdet,
    gram_quadratic_form,
    gram_solve,
    gramian,
    gramian_quadrature,
    matrix_exponential,
    reconstruct_gramian,
    rescaled_series,
)
from .kernel import (
    KernelAsymptotics,
    diagonal_asymptotics,
    drift_integral,
    drift_integral_quadrature,
    exact_kernel,
    log_exact_kernel,
    log_normalized_diagonal,
    offdiagonal_asymptotics,
    stay_cost,
)
from .sde import (
    MomentReport,
    SimulationConfig,
    moment_check,
    simulate,
    write_samples_csv,
)
from .series import (
    TruncatedMatrixSeries,
    poly_eval,
    poly_exp,
    poly_inv,
    poly_log,
    poly_mul,
    poly_pow,
)
from .system import (
    Filtration,
    LinearSystem,
    PointClass,
    build_filtration,
    classify_point,
    validate_system,
)
from .util import parallel_map, worker_count

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ORDER",
    "SMALL_TIME",
    "CurvatureExpansion",
    "DimensionMismatch",
    "ExtrapolationUnstable",
    "Extremal",
    "Filtration",
    "FitIllConditioned",
    "GramianSeries",
    "HypoheatError",
    "IllConditionedWarning",
    "InvalidConfig",
    "KernelAsymptotics",
    "LinearSystem",
    "MomentReport",
    "NonFinite",
    "NonPositiveTime",
    "NotControllable",
    "OracleFit",
    "PointClass",
    "RankDeficientB",
    "SeriesDegenerate",
    "SimulationConfig",
    "TooFewSamples",
    "TruncatedMatrixSeries",
    "build_filtration",
    "classify_point",
    "connecting_covector",
    "covariance",
    "covariance_logdet",
    "det_covariance_expansion",
    "diagonal_asymptotics",
    "drift_integral",
    "drift_integral_quadrature",
    "exact_kernel",
    "extremal",
    "extremal_flow",
    "finite_difference_oracle",
    "flow_integral",
    "geodesic_cost",
    "gram_logdet",
    "gram_quadratic_form",
    "gram_solve",
    "gramian",
    "gramian_quadrature",
    "laurent_expansion",
    "log_exact_kernel",
    "log_normalized_diagonal",
    "matrix_exponential",
    "moment_check",
    "offdiagonal_asymptotics",
    "parallel_map",
    "poly_eval",
    "poly_exp",
    "poly_inv",
    "poly_log",
    "poly_mul",
    "poly_pow",
    "q_of_t",
    "reconstruct_gramian",
    "rescaled_series",
    "simulate",
    "stay_cost",
    "validate_system",
    "value_function",
    "worker_count",
    "write_samples_csv",
]
