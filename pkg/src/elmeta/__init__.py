"""Empirical-likelihood and classical meta-analysis of reported confidence intervals."""

from .analysis import analyze, run_method, to_ratio_scale
from .classic import WeightedSummaries, cd_ci, conventional_ci, dl_tau2, reml_tau2
from .el import EstimatingFunction, Variant, el_analysis, solve_dual
from .errors import (
    BadConfig,
    BadFlags,
    ElMetaError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .types import (
    ALL_METHODS,
    AnalysisResult,
    MetaDataset,
    Method,
    Scale,
    StudyInterval,
    validate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS", "AnalysisResult", "BadConfig", "BadFlags", "ElMetaError",
    "EstimatingFunction", "MetaDataset", "Method", "NumericalError", "ParseError",
    "Scale", "StudyInterval", "ValidationError", "Variant", "WeightedSummaries",
    "analyze", "cd_ci", "conventional_ci", "dl_tau2", "el_analysis", "reml_tau2",
    "run_method", "solve_dual", "to_ratio_scale", "validate_dataset",
]
