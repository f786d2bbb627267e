"""Robust, ellipsoid-specific fitting of point clouds in R^n.

The model is a Gaussian mixture centered on affine images ``A y + t`` of
unit-hypersphere samples, plus a uniform outlier component, fitted by EM.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .accel import accelerated_fit
from .em import FitConfig, FitReport, fit
from .errors import (
    DegenerateSupportError,
    HyperfitError,
    InvalidArgumentError,
    NotAnEllipsoidError,
    NumericFailureError,
)
from .geometry import (
    EllipsoidModel,
    GeometricParams,
    SphereSamples,
    sample_hypersphere,
    to_geometric,
)
from .metrics import FitErrors, fit_errors
from .rdos import initialize, rdos_scores
from .state import ModelState
from .synth import ContaminationSpec, PointCloud, contaminate, random_ellipsoid, sample_surface

__all__ = [
    "BACKEND",
    "ContaminationSpec",
    "DegenerateSupportError",
    "EllipsoidModel",
    "FitConfig",
    "FitErrors",
    "FitReport",
    "GeometricParams",
    "HyperfitError",
    "InvalidArgumentError",
    "ModelState",
    "NotAnEllipsoidError",
    "NumericFailureError",
    "PointCloud",
    "SphereSamples",
    "accelerated_fit",
    "contaminate",
    "fit",
    "fit_errors",
    "initialize",
    "random_ellipsoid",
    "rdos_scores",
    "sample_hypersphere",
    "sample_surface",
    "to_geometric",
]
