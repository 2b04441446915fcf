"""Data model: centering, whitening, the centered SVD and ridge trace functionals.

Everything downstream works on the ``m = min(p, n - 1)`` nonzero spectrum of
``Sigma^{-1/2}(X - Xbar)``, so the ``n - 1 >= p`` and ``p > n - 1`` cases share
one code path. The only orientation-dependent quantity is ``A0 = |n - p - 1|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .errors import CovarianceError, DegenerateDataError, DimensionError, RidgeError

__all__ = [
    "DataMatrix",
    "Spectrum",
    "RidgeMode",
    "RidgeConfig",
    "RidgeTraces",
    "center_and_whiten",
    "ridge_traces",
    "traces_from_eigenvalues",
    "apply_ridge_inverse",
    "ZERO_SV_RTOL",
]

# singular values below this fraction of sigma_1 are treated as exact zeros
ZERO_SV_RTOL = 1e-12

Array = NDArray[np.float64]


def _sym_power(mat: Array, power: float) -> Array:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * vals**power) @ vecs.T


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """A p x n observation matrix (columns are observations) with known covariance.

    ``sigma`` is ``None`` (identity), a length-p vector of variances (diagonal
    covariance) or a full symmetric positive definite p x p matrix.
    """

    values: Array
    sigma: Array | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.values, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError("values must be a two-dimensional p x n array")
        p, n = x.shape
        if n < 2:
            raise DimensionError(f"need at least two observations (columns), got n={n}")
        if p < 1:
            raise DimensionError("need at least one variable (row)")
        if not np.all(np.isfinite(x)):
            raise DimensionError("values contain non-finite entries")
        object.__setattr__(self, "values", x)

        if self.sigma is None:
            return
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim == 1:
            if s.shape != (p,):
                raise DimensionError(f"diagonal covariance must have length {p}, got {s.shape[0]}")
            if not np.all(s > 0):
                raise CovarianceError("diagonal covariance entries must be positive")
        elif s.ndim == 2:
            if s.shape != (p, p):
                raise DimensionError(f"covariance must be {p}x{p}, got {s.shape}")
            scale = max(float(np.max(np.abs(s))), 1.0)
            if not np.allclose(s, s.T, atol=1e-10 * scale, rtol=0.0):
                raise CovarianceError("covariance matrix is not symmetric")
            s = 0.5 * (s + s.T)
            if float(np.linalg.eigvalsh(s)[0]) <= 0.0:
                raise CovarianceError("covariance matrix is not positive definite")
        else:
            raise DimensionError("sigma must be None, a vector or a matrix")
        object.__setattr__(self, "sigma", s)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def whiten(self, z: Array) -> Array:
        """Apply Sigma^{-1/2} to the rows of ``z``."""
        if self.sigma is None:
            return z
        if self.sigma.ndim == 1:
            return z / np.sqrt(self.sigma)[:, None]
        return _sym_power(self.sigma, -0.5) @ z

    def dewhiten(self, z: Array) -> Array:
        """Apply Sigma^{1/2} to the rows of ``z``."""
        if self.sigma is None:
            return z
        if self.sigma.ndim == 1:
            return z * np.sqrt(self.sigma)[:, None]
        return _sym_power(self.sigma, 0.5) @ z


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Centered, whitened SVD of a data matrix.

    ``sv`` holds the m = min(p, n-1) leading singular values of
    ``Sigma^{-1/2}(X - Xbar)`` in descending order; ``ev = sv**2`` are the
    nonzero eigenvalues of W.
    """

    data: DataMatrix
    sv: Array
    left_vecs: Array
    right_vecs: Array
    xbar: Array
    ev: Array = field(init=False)
    trW: float = field(init=False)

    def __post_init__(self) -> None:
        ev = self.sv**2
        object.__setattr__(self, "ev", ev)
        object.__setattr__(self, "trW", float(np.sum(ev)))

    @property
    def p(self) -> int:
        return self.data.p

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def m(self) -> int:
        return min(self.p, self.n - 1)

    @property
    def A0(self) -> int:
        return abs(self.n - self.p - 1)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.sv))

    def mean_matrix(self) -> Array:
        return np.repeat(self.xbar[:, None], self.n, axis=1)

    def rebuild(self, multipliers: Array) -> Array:
        """Return ``X - Sigma^{1/2} L diag(sv * (1 - f)) R^T`` for per-direction multipliers f.

        Writing the estimate as a correction to X keeps f = 1 an exact identity.
        """
        f = np.asarray(multipliers, dtype=np.float64)
        if f.shape != self.sv.shape:
            raise DimensionError(f"expected {self.sv.shape[0]} multipliers, got {f.shape}")
        shrink = self.sv * (1.0 - f)
        correction = (self.left_vecs * shrink) @ self.right_vecs.T
        return self.data.values - self.data.dewhiten(correction)


def center_and_whiten(data: DataMatrix) -> Spectrum:
    """Center the rows of X, whiten by Sigma^{-1/2} and take the thin SVD."""
    x = data.values
    xbar = x.mean(axis=1)
    z = data.whiten(x - xbar[:, None])
    m = min(data.p, data.n - 1)
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    u, s, vt = u[:, :m], s[:m].copy(), vt[:m, :]
    if s.size and s[0] > 0:
        s[s < ZERO_SV_RTOL * s[0]] = 0.0
    else:
        s[:] = 0.0
    return Spectrum(data=data, sv=s, left_vecs=u, right_vecs=vt.T, xbar=xbar)


class RidgeMode(str, Enum):
    CONSTANT = "const"
    TRACE = "trace"


@dataclass(frozen=True, slots=True)
class RidgeConfig:
    """Ridge function: alpha = c (constant) or alpha = c * tr W (trace proportional)."""

    mode: RidgeMode = RidgeMode.TRACE
    c: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", RidgeMode(self.mode))
        if not np.isfinite(self.c) or self.c <= 0:
            raise RidgeError(f"ridge constant c must be positive, got {self.c}")

    @property
    def c0(self) -> float:
        """d alpha / d l_i: 0 in constant mode, c in trace mode."""
        return 0.0 if self.mode is RidgeMode.CONSTANT else float(self.c)

    def alpha_hat(self, trW: float) -> float:
        if self.mode is RidgeMode.CONSTANT:
            return float(self.c)
        return float(self.c) * float(trW)

    @classmethod
    def paper_default(cls, m: int) -> "RidgeConfig":
        """alpha = tr W / m, the trace-proportional choice used by S2/D2."""
        return cls(RidgeMode.TRACE, 1.0 / m)


@dataclass(frozen=True, slots=True)
class RidgeTraces:
    """Trace functionals of V = (W + alpha I)^{-1} over the nonzero spectrum."""

    alpha: float
    trW: float
    trV: float
    trVW: float
    trV2W: float
    trV3W: float
    trV2: float
    trV4W2: float
    trV3W2: float
    trV2W2: float
    u: float


def traces_from_eigenvalues(ev: Array, alpha: float) -> RidgeTraces:
    ev = np.asarray(ev, dtype=np.float64)
    if not alpha > 0:
        raise RidgeError(f"ridge parameter must be positive, got {alpha}")
    trW = float(ev.sum())
    if trW <= 0:
        raise DegenerateDataError("tr W = 0: all columns are equal after centering")
    r = 1.0 / (ev + alpha)
    return RidgeTraces(
        alpha=float(alpha),
        trW=trW,
        trV=float(r.sum()),
        trVW=float((ev * r).sum()),
        trV2W=float((ev * r**2).sum()),
        trV3W=float((ev * r**3).sum()),
        trV2=float((r**2).sum()),
        trV4W2=float((ev**2 * r**4).sum()),
        trV3W2=float((ev**2 * r**3).sum()),
        trV2W2=float((ev**2 * r**2).sum()),
        u=1.0 / trW,
    )


def ridge_traces(spec: Spectrum, ridge: RidgeConfig) -> RidgeTraces:
    return traces_from_eigenvalues(spec.ev, ridge.alpha_hat(spec.trW))


def apply_ridge_inverse(spec: Spectrum, alpha: float) -> Array:
    """Per-direction factors 1/(sigma_i^2 + alpha) of (W + alpha I)^{-1} on the data span."""
    if not alpha > 0:
        raise RidgeError(f"ridge parameter must be positive, got {alpha}")
    return 1.0 / (spec.ev + alpha)
