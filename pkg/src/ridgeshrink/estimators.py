"""Singular-value shrinkage estimators of the mean matrix.

Every estimator here has the form ``Xbar + Sigma^{1/2} L diag(sv_i * f_i) R^T``
for a vector of per-direction multipliers ``f``; they differ only in how f is
computed. Identifiers (``S2plus``, ``em2``, ``gd``...) are the stable CLI
vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateDataError
from .matmodel import (
    DataMatrix,
    RidgeConfig,
    RidgeMode,
    RidgeTraces,
    Spectrum,
    center_and_whiten,
    ridge_traces,
)

__all__ = [
    "Weights",
    "EstimateReport",
    "ESTIMATOR_IDS",
    "PAPER_SIX",
    "rls_multipliers",
    "rls_apply",
    "estimate_a_single",
    "estimate_b_double",
    "a_single_from_traces",
    "ridge_shrinkage",
    "efron_morris",
    "james_stein",
    "gavish_donoho",
    "identity",
    "estimate",
    "default_ridge",
    "js_constant",
    "em_constants",
]

Array = NDArray[np.float64]

ESTIMATOR_IDS = (
    "S1", "S2", "D1", "D2", "S2plus", "D2plus",
    "em", "em2", "emplus", "em2plus", "js", "jsplus", "gd",
)
# column order of the simulation tables
PAPER_SIX = ("S2plus", "D2plus", "emplus", "em2plus", "jsplus", "gd")


@dataclass(frozen=True, slots=True)
class Weights:
    a: float
    b: float = 0.0


@dataclass(frozen=True, eq=False)
class EstimateReport:
    theta_hat: Array
    estimator_id: str
    factors: Array
    weights: Weights | None = None
    alpha_hat: float | None = None
    sure_delta: float | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _require_spectrum(spec: Spectrum) -> None:
    if spec.trW <= 0:
        raise DegenerateDataError("tr W = 0: the centered data matrix is zero")


def rls_multipliers(spec: Spectrum, alpha: float, w: Weights, positive_part: bool) -> Array:
    g = 1.0 - w.a / (spec.ev + alpha)
    if w.b != 0.0:
        _require_spectrum(spec)
        g = g - w.b / spec.trW
    if positive_part:
        g = np.maximum(g, 0.0)
    return g


def rls_apply(
    spec: Spectrum,
    ridge: RidgeConfig,
    w: Weights,
    positive_part: bool = False,
    estimator_id: str = "rls",
) -> EstimateReport:
    """Ridge-type linear shrinkage X - {a (W + alpha I)^{-1} + b/trW I}(X - Xbar) with given weights."""
    if ridge.mode is RidgeMode.TRACE:
        _require_spectrum(spec)
    alpha = ridge.alpha_hat(spec.trW)
    f = rls_multipliers(spec, alpha, w, positive_part)
    sure = None
    if not positive_part and spec.trW > 0:
        from .sure import sure_delta

        sure = sure_delta(spec, ridge, w)
    return EstimateReport(
        theta_hat=spec.rebuild(f),
        estimator_id=estimator_id,
        factors=f,
        weights=w,
        alpha_hat=alpha,
        sure_delta=sure,
    )


def a_single_from_traces(t: RidgeTraces, A0: int, c0: float) -> float:
    if t.trV2W <= 0:
        raise DegenerateDataError("tr(V^2 W) = 0: no nonzero singular value")
    return (A0 * t.trV + t.alpha * t.trV**2) / t.trV2W - (2.0 * c0 + 1.0)


def estimate_a_single(spec: Spectrum, ridge: RidgeConfig) -> float:
    """SURE-minimizing weight a for the single shrinkage estimator (b = 0)."""
    _require_spectrum(spec)
    return a_single_from_traces(ridge_traces(spec, ridge), spec.A0, ridge.c0)


def estimate_b_double(spec: Spectrum, ridge: RidgeConfig, a_hat: float) -> float:
    """SURE-minimizing weight b given a: ((n-1)p - 2) - tr(VW) a."""
    _require_spectrum(spec)
    t = ridge_traces(spec, ridge)
    return js_constant(spec.n, spec.p) - t.trVW * a_hat


def js_constant(n: int, p: int) -> float:
    return float((n - 1) * p - 2)


def em_constants(n: int, p: int) -> tuple[int, int]:
    """(|n-p-1| - 1, b0) for the extended Efron-Morris estimators."""
    b0 = min(p * p + p - 2, (n - 1) ** 2 + (n - 1) - 2)
    return abs(n - p - 1) - 1, b0


def default_ridge(estimator_id: str, m: int, c: float | None = None) -> RidgeConfig:
    """S1/D1 use alpha = c (default 1); S2/D2 use alpha = c tr W (default c = 1/m)."""
    if estimator_id.startswith(("S1", "D1")):
        return RidgeConfig(RidgeMode.CONSTANT, 1.0 if c is None else c)
    return RidgeConfig(RidgeMode.TRACE, 1.0 / m if c is None else c)


def ridge_shrinkage(
    spec: Spectrum,
    ridge: RidgeConfig,
    double: bool,
    positive_part: bool,
    estimator_id: str | None = None,
) -> EstimateReport:
    """Single (b = 0) or double ridge shrinkage with SURE-estimated weights."""
    from .sure import sure_estimated

    a_hat = estimate_a_single(spec, ridge)
    b_hat = estimate_b_double(spec, ridge, a_hat) if double else 0.0
    w = Weights(a_hat, b_hat)
    alpha = ridge.alpha_hat(spec.trW)
    f = rls_multipliers(spec, alpha, w, positive_part)
    if estimator_id is None:
        kind = ("D" if double else "S") + ("1" if ridge.mode is RidgeMode.CONSTANT else "2")
        estimator_id = kind + ("plus" if positive_part else "")
    sure = None if positive_part else sure_estimated(spec, ridge, double)
    return EstimateReport(
        theta_hat=spec.rebuild(f),
        estimator_id=estimator_id,
        factors=f,
        weights=w,
        alpha_hat=alpha,
        sure_delta=sure,
    )


def efron_morris(spec: Spectrum, double: bool = False, positive_part: bool = False) -> EstimateReport:
    """Extended Efron-Morris estimators built on the Moore-Penrose inverse W^+."""
    _require_spectrum(spec)
    k, b0 = em_constants(spec.n, spec.p)
    nz = spec.sv > 0
    f = np.ones_like(spec.sv)
    f[nz] = 1.0 - k / spec.ev[nz]
    if double:
        f[nz] -= b0 / spec.trW
    if positive_part:
        f[nz] = np.maximum(f[nz], 0.0)
    warnings: tuple[str, ...] = ()
    if spec.A0 < 2:
        warnings = (
            f"|n-p-1| = {spec.A0} < 2: extended Efron-Morris estimator is not minimax "
            "and W^+ is ill-conditioned; expect unstable risk",
        )
    eid = "em" + ("2" if double else "") + ("plus" if positive_part else "")
    return EstimateReport(
        theta_hat=spec.rebuild(f),
        estimator_id=eid,
        factors=f,
        weights=Weights(float(k), float(b0) if double else 0.0),
        warnings=warnings,
    )


def james_stein(spec: Spectrum, positive_part: bool = False) -> EstimateReport:
    """(1 - b_js / tr W)(X - Xbar) + Xbar with b_js = (n-1)p - 2."""
    _require_spectrum(spec)
    g = 1.0 - js_constant(spec.n, spec.p) / spec.trW
    if positive_part:
        g = max(g, 0.0)
    f = np.full_like(spec.sv, g)
    return EstimateReport(
        theta_hat=spec.rebuild(f),
        estimator_id="jsplus" if positive_part else "js",
        factors=f,
    )


def _gd_shrunk_values(sv: Array, n: int, p: int) -> Array:
    nu = max(n - 1, p)
    beta = min(n - 1, p) / nu
    y = sv / np.sqrt(nu)
    out = np.zeros_like(y)
    above = y > 1.0 + np.sqrt(beta)
    ya = y[above]
    out[above] = np.sqrt(nu) * np.sqrt(np.maximum((ya**2 - beta - 1.0) ** 2 - 4.0 * beta, 0.0)) / ya
    return out


def gavish_donoho(spec: Spectrum) -> EstimateReport:
    """Frobenius-optimal singular value shrinker for unit-variance white noise.

    The shrinker works on ``y = sv / sqrt(nu)`` with aspect ratio
    ``beta = min(n-1, p) / nu``, ``nu = max(n-1, p)``, and is zero at or
    below the bulk edge ``1 + sqrt(beta)``. When p > n - 1 the whole
    estimator, centering included, is computed for the transposed whitened
    data; ``factors`` then refer to that transposed spectrum.
    """
    if spec.m < 1:
        raise DegenerateDataError("empty spectrum")
    if spec.p <= spec.n - 1:
        new_sv = _gd_shrunk_values(spec.sv, spec.n, spec.p)
        f = np.zeros_like(new_sv)
        nz = spec.sv > 0
        f[nz] = new_sv[nz] / spec.sv[nz]
        return EstimateReport(theta_hat=spec.rebuild(f), estimator_id="gd", factors=f)

    data = spec.data
    zt = data.whiten(data.values).T
    t_spec = center_and_whiten(DataMatrix(zt))
    new_sv = _gd_shrunk_values(t_spec.sv, t_spec.n, t_spec.p)
    f = np.zeros_like(new_sv)
    nz = t_spec.sv > 0
    f[nz] = new_sv[nz] / t_spec.sv[nz]
    theta_hat = data.dewhiten(t_spec.rebuild(f).T)
    return EstimateReport(theta_hat=theta_hat, estimator_id="gd", factors=f)


def identity(spec: Spectrum) -> EstimateReport:
    """The unbiased estimator X itself (harness baseline)."""
    f = np.ones_like(spec.sv)
    return EstimateReport(theta_hat=spec.data.values.copy(), estimator_id="identity", factors=f)


def estimate(spec: Spectrum, estimator_id: str, c: float | None = None) -> EstimateReport:
    """Dispatch on an estimator identifier; ``c`` only affects the ridge family."""
    eid = estimator_id
    if eid == "identity":
        return identity(spec)
    if eid in ("S1", "S2", "D1", "D2", "S2plus", "D2plus", "S1plus", "D1plus"):
        ridge = default_ridge(eid, spec.m, c)
        return ridge_shrinkage(spec, ridge, double=eid.startswith("D"),
                               positive_part=eid.endswith("plus"), estimator_id=eid)
    if eid in ("em", "em2", "emplus", "em2plus"):
        return efron_morris(spec, double=eid.startswith("em2"), positive_part=eid.endswith("plus"))
    if eid in ("js", "jsplus"):
        return james_stein(spec, positive_part=eid == "jsplus")
    if eid == "gd":
        return gavish_donoho(spec)
    raise KeyError(f"unknown estimator id {estimator_id!r}; expected one of {', '.join(ESTIMATOR_IDS)}")

