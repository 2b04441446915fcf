"""Exception hierarchy shared by all modules."""

from __future__ import annotations

__all__ = [
    "ShrinkageError",
    "DimensionError",
    "CovarianceError",
    "RidgeError",
    "DegenerateDataError",
    "SettingError",
]


class ShrinkageError(ValueError):
    """Base class for data and numeric errors raised by ridgeshrink."""


class DimensionError(ShrinkageError):
    pass


class CovarianceError(ShrinkageError):
    pass


class RidgeError(ShrinkageError):
    pass


class DegenerateDataError(ShrinkageError):
    """Raised when the centered data has no usable spectrum (e.g. tr W = 0)."""


class SettingError(ShrinkageError):
    """Raised when an experiment is requested outside the regime it covers."""
