"""Ridge-type linear shrinkage estimation of a normal mean matrix."""

from .errors import (
    CovarianceError,
    DegenerateDataError,
    DimensionError,
    RidgeError,
    SettingError,
    ShrinkageError,
)
from .estimators import ESTIMATOR_IDS, PAPER_SIX, EstimateReport, Weights, estimate
from .matmodel import DataMatrix, RidgeConfig, RidgeMode, Spectrum, center_and_whiten

__version__ = "0.1.0"

__all__ = [
    "CovarianceError",
    "DegenerateDataError",
    "DimensionError",
    "RidgeError",
    "SettingError",
    "ShrinkageError",
    "ESTIMATOR_IDS",
    "PAPER_SIX",
    "EstimateReport",
    "Weights",
    "estimate",
    "DataMatrix",
    "RidgeConfig",
    "RidgeMode",
    "Spectrum",
    "center_and_whiten",
]
