"""Constrained estimation for grouped linear models that share a common
parameter, with synthetic experiment presets, geometric Monte-Carlo
diagnostics, and cross-validation for the constraint radii."""

__version__ = "0.1.0"

from .errors import (
    ConeSamplingError,
    ConfigError,
    DataEnrichError,
    DimensionMismatch,
    NumericalDivergence,
)
from .model import (
    Constraint,
    ConstraintSpec,
    GroupedDataset,
    ParameterStack,
    WeightScheme,
    objective,
    predict,
    residuals,
    weighted_error,
)
from .projections import project, project_l1, project_l2
from .solver import (
    ConvergenceTrace,
    FitConfig,
    FitResult,
    StepSizes,
    convergence_rate,
    default_step_sizes,
    fit,
    theoretical_step_sizes,
)
from .synthesis import (
    ExperimentResult,
    SynthesisSpec,
    SyntheticInstance,
    generate,
    preset,
    run_experiment,
)
from .diagnostics import (
    ContractionEstimate,
    DeicEstimate,
    DiagnosticsReport,
    ExplicitRays,
    FullSpace,
    L1DescentCone,
    L2DescentCone,
    WidthEstimate,
    contraction_probe,
    deic_probe,
    gaussian_width_mc,
    re_probe,
    sample_cone_direction,
    samplers_for,
)
from .model_selection import CvPlan, CvPoint, CvResult, kfold_cv, pilot_radii
from .io import (
    load_dataset,
    load_params,
    read_trace_csv,
    save_dataset,
    save_params,
    write_trace_csv,
)

__all__ = [
    "__version__",
    "DataEnrichError",
    "DimensionMismatch",
    "NumericalDivergence",
    "ConeSamplingError",
    "ConfigError",
    "GroupedDataset",
    "ParameterStack",
    "Constraint",
    "ConstraintSpec",
    "WeightScheme",
    "residuals",
    "objective",
    "predict",
    "weighted_error",
    "project_l1",
    "project_l2",
    "project",
    "StepSizes",
    "FitConfig",
    "ConvergenceTrace",
    "FitResult",
    "default_step_sizes",
    "theoretical_step_sizes",
    "fit",
    "convergence_rate",
    "SynthesisSpec",
    "SyntheticInstance",
    "generate",
    "preset",
    "run_experiment",
    "ExperimentResult",
    "FullSpace",
    "ExplicitRays",
    "L1DescentCone",
    "L2DescentCone",
    "WidthEstimate",
    "gaussian_width_mc",
    "sample_cone_direction",
    "samplers_for",
    "re_probe",
    "DeicEstimate",
    "deic_probe",
    "ContractionEstimate",
    "contraction_probe",
    "DiagnosticsReport",
    "CvPlan",
    "CvPoint",
    "CvResult",
    "kfold_cv",
    "pilot_radii",
    "save_dataset",
    "load_dataset",
    "save_params",
    "load_params",
    "write_trace_csv",
    "read_trace_csv",
]
