"""Sensitivity analysis for stabilized inverse-probability-weighting
estimators: exact ranges of point estimates over odds-ratio-bounded selection
deviations, and percentile-bootstrap confidence intervals built from the
per-resample extrema.
"""

from .bootstrap import (
    BootstrapConfig,
    ResampleFailureError,
    empirical_quantile,
    percentile_bootstrap,
    percentile_bootstrap_sweep,
    resample_indices,
    resample_rng,
)
from .core import (
    ConfidenceReport,
    Error,
    EstimandKind,
    LipschitzSpec,
    Method,
    Mode,
    ObservationTable,
    PointInterval,
    SensitivitySpec,
    Target,
    ValidationError,
    partition_by_arm,
    validate_table,
)
from .estimators import (
    EstimatorContext,
    ate_interval,
    att_interval,
    make_context,
    mean_response_interval,
    nonrespondent_mean_interval,
    point_interval,
    saipw_interval,
    sipw_at,
)
from .extrema import (
    ExtremumResult,
    FractionalProblem,
    InternalSolverError,
    SizeCapError,
    brute_force_extrema,
    charnes_cooper_lp,
    evaluate_fractional,
    lipschitz_extremum,
    separable_ate_extremum,
    threshold_extremum,
)
from .glm import (
    DegenerateClassError,
    FitError,
    LinearFit,
    LogisticFit,
    RankDeficiencyError,
    SeparationError,
    fit_logistic,
    fit_ols,
)
from .simharness import (
    DEFAULT_SUPPORT,
    CoverageResult,
    PopulationModel,
    SimSetting,
    coverage_study,
    generate_dataset,
    kl_projection,
    population_interval,
    population_model,
)
from .simplex import LPSolution, SimplexError, solve_lp

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "Error",
    "ValidationError",
    "Mode",
    "Target",
    "Method",
    "EstimandKind",
    "LipschitzSpec",
    "SensitivitySpec",
    "ObservationTable",
    "PointInterval",
    "ConfidenceReport",
    "validate_table",
    "partition_by_arm",
    # glm
    "FitError",
    "SeparationError",
    "RankDeficiencyError",
    "DegenerateClassError",
    "LogisticFit",
    "LinearFit",
    "fit_logistic",
    "fit_ols",
    # simplex
    "SimplexError",
    "LPSolution",
    "solve_lp",
    # extrema
    "SizeCapError",
    "InternalSolverError",
    "FractionalProblem",
    "ExtremumResult",
    "evaluate_fractional",
    "threshold_extremum",
    "charnes_cooper_lp",
    "separable_ate_extremum",
    "lipschitz_extremum",
    "brute_force_extrema",
    # estimators
    "EstimatorContext",
    "make_context",
    "sipw_at",
    "mean_response_interval",
    "nonrespondent_mean_interval",
    "ate_interval",
    "att_interval",
    "saipw_interval",
    "point_interval",
    # bootstrap
    "BootstrapConfig",
    "ResampleFailureError",
    "empirical_quantile",
    "resample_rng",
    "resample_indices",
    "percentile_bootstrap",
    "percentile_bootstrap_sweep",
    # simulation harness
    "DEFAULT_SUPPORT",
    "SimSetting",
    "PopulationModel",
    "CoverageResult",
    "generate_dataset",
    "kl_projection",
    "population_model",
    "population_interval",
    "coverage_study",
]
