"""Covariate-adjusted nonlinear regression.

Observed data are multiplicatively distorted by smooth functions of an
observable confounder U.  The distortions are estimated by kernel smoothing,
the data restored, and beta estimated by nonlinear least squares with
empirical-likelihood and normal-approximation confidence regions.
"""

from .efficiency import MomentSet, Verdict, ck_matrix, efficiency_map, efficiency_verdict, variance_v1, variance_v2
from .errors import (
    ConsistencyError,
    ConvexHullError,
    CovAdjError,
    DegenerateBandwidthError,
    MeanCheckError,
    NonFiniteError,
    SingularMatrixError,
    ValidationError,
)
from .inference import el_ratio, sigma_hat, wald_region, wald_statistic
from .kernel import kernel_weight, loocv_bandwidth, select_bandwidths
from .model import MODEL_IDS, ModelSpec, builtin_model
from .nls import FitConfig, FitResult, fit, score_vectors
from .pipeline import Analysis, analyze, coordinate_se
from .restore import DistortionFit, ObservedSample, RestoredSample, estimate_distortions, restore_sample

__version__ = "0.1.0"

__all__ = [
    "MomentSet", "Verdict", "ck_matrix", "efficiency_map", "efficiency_verdict", "variance_v1", "variance_v2",
    "ConsistencyError", "ConvexHullError", "CovAdjError", "DegenerateBandwidthError", "MeanCheckError",
    "NonFiniteError", "SingularMatrixError", "ValidationError",
    "el_ratio", "sigma_hat", "wald_region", "wald_statistic",
    "kernel_weight", "loocv_bandwidth", "select_bandwidths",
    "MODEL_IDS", "ModelSpec", "builtin_model",
    "FitConfig", "FitResult", "fit", "score_vectors",
    "Analysis", "analyze", "coordinate_se",
    "DistortionFit", "ObservedSample", "RestoredSample", "estimate_distortions", "restore_sample",
]
