"""Higher-order orthogonal scores and debiased estimators for treatment effects."""

from .dataio import (
    RunConfig,
    SimSettings,
    VerifySettings,
    load_csv_dataset,
    load_run_config,
    read_report_csv,
    save_csv_dataset,
    write_report,
)
from .estimators import (
    Dataset,
    Diagnostics,
    EstimateReport,
    SplitPlan,
    epsilon_ate,
    estimate_dml,
    estimate_dr,
    estimate_higher_order,
    estimate_moments,
    make_split,
    pairwise_from_theta,
    relative_ate_error,
    single_resample_pass,
)
from .exceptions import (
    ConfigError,
    DegenerateMoment,
    EmptyFold,
    EmptyResidualSet,
    InvalidOrder,
    MissingClass,
    NonFinite,
    OrthoError,
    ParseError,
    SchemaError,
    ShapeMismatch,
    SingularSystem,
    ZeroDenominator,
)
from .gateaux import DerivativeEstimate, OrthogonalityReport, check_orthogonality
from .learners import (
    LearnerSpec,
    NuisanceFits,
    fit_forest_classifier,
    fit_forest_regressor,
    fit_lasso,
    fit_lasso_cv,
    fit_logistic,
    fit_nuisances,
)
from .score import (
    Moments,
    OrthoCoefficients,
    binomial,
    compute_coefficients,
    correction_derivative_values,
    correction_values,
    dml_correction_values,
    dml_score_values,
    eval_correction,
    eval_score,
    eval_score_dml,
    random_realizable_moments,
    score_values,
    solve_coefficients_oracle,
)
from .simulation import (
    EstimatorSpec,
    NoisyPropensity,
    SimConfig,
    SimTruth,
    SweepReport,
    TreatmentOutcomeModel,
    draw_default_params,
    generate_dataset,
    run_estimator,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Dataset",
    "DegenerateMoment",
    "DerivativeEstimate",
    "Diagnostics",
    "EmptyFold",
    "EmptyResidualSet",
    "EstimateReport",
    "EstimatorSpec",
    "InvalidOrder",
    "LearnerSpec",
    "MissingClass",
    "Moments",
    "NoisyPropensity",
    "NonFinite",
    "NuisanceFits",
    "OrthoCoefficients",
    "OrthoError",
    "OrthogonalityReport",
    "ParseError",
    "RunConfig",
    "SchemaError",
    "ShapeMismatch",
    "SimConfig",
    "SimSettings",
    "SimTruth",
    "SingularSystem",
    "SplitPlan",
    "SweepReport",
    "TreatmentOutcomeModel",
    "VerifySettings",
    "ZeroDenominator",
    "binomial",
    "check_orthogonality",
    "compute_coefficients",
    "correction_derivative_values",
    "correction_values",
    "dml_correction_values",
    "dml_score_values",
    "draw_default_params",
    "epsilon_ate",
    "estimate_dml",
    "estimate_dr",
    "estimate_higher_order",
    "estimate_moments",
    "eval_correction",
    "eval_score",
    "eval_score_dml",
    "fit_forest_classifier",
    "fit_forest_regressor",
    "fit_lasso",
    "fit_lasso_cv",
    "fit_logistic",
    "fit_nuisances",
    "generate_dataset",
    "load_csv_dataset",
    "load_run_config",
    "make_split",
    "pairwise_from_theta",
    "random_realizable_moments",
    "read_report_csv",
    "relative_ate_error",
    "run_estimator",
    "run_sweep",
    "save_csv_dataset",
    "score_values",
    "single_resample_pass",
    "solve_coefficients_oracle",
    "write_report",
]
