"""Unbiased risk-difference estimates, minimaxity conditions and Bayes-optimal weights.

Sign convention: every ``Delta`` returned here estimates
``n p {risk(estimator) - risk(X)}``, so negative values mean improvement over X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np
from numpy.typing import NDArray

from .errors import CovarianceError, DegenerateDataError, DimensionError, SettingError
from .estimators import Weights, a_single_from_traces, js_constant
from .matmodel import RidgeConfig, RidgeMode, RidgeTraces, Spectrum, ridge_traces, traces_from_eigenvalues

__all__ = [
    "SureInput",
    "MinimaxVerdict",
    "BayesWeights",
    "sure_delta",
    "sure_delta_from_traces",
    "a_hat_gradient",
    "sure_estimated",
    "sure_estimated_from_eigenvalues",
    "sure_general",
    "sure_general_from_eigenvalues",
    "prop1_bound",
    "prop2_bound",
    "minimax_known",
    "single_quadratic",
    "single_rhs",
    "single_clause3_rhs",
    "double_quadratic",
    "double_rhs",
    "double_clause2_rhs",
    "trace_mode_c_threshold",
    "minimax_estimated",
    "bayes_optimal_weights",
]

Array = NDArray[np.float64]
Number = float | Fraction


@dataclass(frozen=True, eq=False)
class SureInput:
    spec: Spectrum
    ridge: RidgeConfig
    weights: Weights


def sure_delta_from_traces(
    t: RidgeTraces, n: int, p: int, c0: float, w: Weights
) -> float:
    A0 = abs(n - p - 1)
    a, b = w.a, w.b
    return (
        t.trV2W * a * a
        + 2.0 * t.trVW * t.u * a * b
        + t.u * b * b
        - 2.0 * A0 * t.trV * a
        - 2.0 * (n - 1) * p * t.u * b
        - 2.0 * t.alpha * t.trV**2 * a
        + 2.0 * (2.0 * c0 + 1.0) * t.trV2W * a
        + 4.0 * t.u * b
    )


def sure_delta(spec: Spectrum | SureInput, ridge: RidgeConfig | None = None, w: Weights | None = None) -> float:
    """Unbiased estimate of n p {R(ridge estimator with fixed (a, b)) - R(X)}."""
    if isinstance(spec, SureInput):
        spec, ridge, w = spec.spec, spec.ridge, spec.weights
    assert ridge is not None and w is not None
    return sure_delta_from_traces(ridge_traces(spec, ridge), spec.n, spec.p, ridge.c0, w)


def a_hat_gradient(ev: Array, n: int, p: int, ridge: RidgeConfig) -> tuple[float, Array]:
    """Return the SURE weight a_hat and its partial derivatives d a_hat / d l_i."""
    ev = np.asarray(ev, dtype=np.float64)
    A0 = abs(n - p - 1)
    c0 = ridge.c0
    alpha = ridge.alpha_hat(float(ev.sum()))
    t = traces_from_eigenvalues(ev, alpha)
    r = 1.0 / (ev + alpha)
    num = A0 * t.trV + alpha * t.trV**2
    den = t.trV2W
    d_trV = -(r**2) - c0 * t.trV2
    d_den = r**2 - 2.0 * ev * r**3 - 2.0 * c0 * t.trV3W
    d_num = A0 * d_trV + c0 * t.trV**2 + 2.0 * alpha * t.trV * d_trV
    grad = (d_num * den - num * d_den) / den**2
    return a_single_from_traces(t, A0, c0), grad


def sure_estimated_from_eigenvalues(ev: Array, n: int, p: int, ridge: RidgeConfig, double: bool) -> float:
    ev = np.asarray(ev, dtype=np.float64)
    a_hat, grad = a_hat_gradient(ev, n, p, ridge)
    alpha = ridge.alpha_hat(float(ev.sum()))
    t = traces_from_eigenvalues(ev, alpha)
    r = 1.0 / (ev + alpha)
    delta = -a_hat**2 * t.trV2W - 4.0 * float(np.sum(ev * r * grad))
    if not double:
        return delta
    b_hat = js_constant(n, p) - t.trVW * a_hat
    d_trVW = alpha * r**2 - ridge.c0 * t.trV2W
    d_b = -d_trVW * a_hat - t.trVW * grad
    return delta - b_hat**2 / t.trW - 4.0 / t.trW * float(np.sum(ev * d_b))


def sure_estimated(spec: Spectrum, ridge: RidgeConfig, double: bool = False) -> float:
    """Unbiased risk-difference estimate of the estimator with SURE-estimated weights.

    Unlike ``sure_delta`` at ``(a_hat, b_hat)``, this accounts for the data
    dependence of the weights through their derivatives in the eigenvalues.
    """
    if spec.trW <= 0:
        raise DegenerateDataError("tr W = 0")
    return sure_estimated_from_eigenvalues(spec.ev, spec.n, spec.p, ridge, double)


def sure_general_from_eigenvalues(
    ev: Array,
    n: int,
    p: int,
    g: Array,
    dg: Array,
    coincident_slope: Array | None = None,
    gap_rtol: float = 1e-9,
) -> float:
    """Risk-difference estimate for X - H G(l) H^T (X - Xbar), G = diag(g_i(l)).

    ``dg`` holds the partials d g_i / d l_i. When two eigenvalues collide within
    ``gap_rtol * l_1`` the divided difference is replaced by the mean of
    ``coincident_slope`` at the pair, if supplied.
    """
    ev = np.asarray(ev, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    dg = np.asarray(dg, dtype=np.float64)
    if not (ev.shape == g.shape == dg.shape):
        raise DimensionError("ev, g and dg must have the same shape")
    big_n = max(n - 1, p)
    if ev.size == 0 or not np.any(g):
        return 0.0
    gdiff = g[:, None] - g[None, :]
    ldiff = ev[:, None] - ev[None, :]
    close = np.abs(ldiff) < gap_rtol * float(np.max(ev))
    np.fill_diagonal(close, False)
    safe = np.where(close, 1.0, ldiff)
    np.fill_diagonal(safe, 1.0)
    dd = gdiff / safe
    if np.any(close):
        if coincident_slope is None:
            raise DegenerateDataError("coincident eigenvalues: supply coincident_slope for the divided differences")
        s = np.asarray(coincident_slope, dtype=np.float64)
        dd = np.where(close, 0.5 * (s[:, None] + s[None, :]), dd)
    np.fill_diagonal(dd, 0.0)
    return float(
        np.sum(ev * g**2)
        - 2.0 * big_n * np.sum(g)
        - 2.0 * np.sum(ev * dd.sum(axis=1))
        - 4.0 * np.sum(ev * dg)
    )


def sure_general(spec: Spectrum, g: Array, dg: Array, coincident_slope: Array | None = None) -> float:
    return sure_general_from_eigenvalues(spec.ev, spec.n, spec.p, g, dg, coincident_slope)


# --------------------------------------------------------------------------
# minimaxity


@dataclass(frozen=True)
class MinimaxVerdict:
    """Outcome of a sufficient-condition check.

    ``status`` is one of ``minimax``, ``not-covered`` (no clause applies or the
    clause fails; the estimator may still be minimax) and
    ``violates-known-bound`` (known-weight bounds exceeded).
    """

    minimax: bool
    condition_id: str
    margin: Number
    status: str
    details: dict = field(default_factory=dict)


def _exact(x):
    if isinstance(x, bool):
        raise TypeError("expected a number")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    return x


def _min_dim(n: int, p: int) -> tuple[int, int]:
    """(P, A0) after the p <-> n-1 swap used when p > n - 1."""
    return min(p, n - 1), abs(n - p - 1)


def prop1_bound(n: int, p: int, c0) -> Number:
    """Upper bound on a for known-weight minimaxity of the single estimator."""
    return 2 * (abs(n - p - 1) - 1 + ((n - 1) * p - 2) * _exact(c0))


def prop2_bound(n: int, p: int, c0, a) -> Number:
    """Upper bound on b for the double estimator to dominate the single one."""
    P = min(p, n - 1)
    c0 = _exact(c0)
    return 2 * (n - 1) * p - 4 - 2 * _exact(a) * P / (1 + c0 * P)


def minimax_known(n: int, p: int, ridge: RidgeConfig, w: Weights, c0=None) -> MinimaxVerdict:
    """Sufficient conditions for minimaxity with fixed (known) weights."""
    c0 = ridge.c0 if c0 is None else c0
    a, b = _exact(w.a), _exact(w.b)
    bound_a = prop1_bound(n, p, c0)
    if b < 0:
        return MinimaxVerdict(False, "prop2", b, "not-covered", {"bound_a": bound_a})
    if b == 0:
        margin = min(a, bound_a - a)
        details = {"bound_a": bound_a}
        cid = "prop1"
    else:
        bound_b = prop2_bound(n, p, c0, a)
        margin = min(a, bound_a - a, b, bound_b - b)
        details = {"bound_a": bound_a, "bound_b": bound_b}
        cid = "prop2"
    ok = margin >= 0
    return MinimaxVerdict(ok, cid, margin, "minimax" if ok else "violates-known-bound", details)


def _inv(p):
    return Fraction(1, p) if isinstance(p, int) else 1.0 / p


def single_rhs(p: int, c) -> Number:
    """Right-hand side of the A0 lower bound for the single estimator, trace mode."""
    c = _exact(c)
    num = (-p * p + 12) * c**2 + (-p * p + 8 * p + 14 + 4 * _inv(p)) * c + 14
    return num / ((1 + c) * (1 + c * p))


def single_quadratic(p: int, A0: int, c) -> Number:
    c = _exact(c)
    return (
        (p * A0 + p * p - 12) * c**2
        + ((p + 1) * A0 + p * p - 8 * p - 14 - 4 * _inv(p)) * c
        + A0 - 14
    )


def single_clause3_rhs(p: int) -> Fraction:
    return Fraction(-p**3 + 21 * p**2 + 14 * p + 16, 2 * p * (p + 1))


def double_rhs(p: int, c) -> Number:
    c = _exact(c)
    num = (-p * p + 16 - 4 * _inv(p)) * c**2 + (-p * p + 8 * p + 18) * c + 14
    return num / ((1 + c) * (1 + c * p))


def double_quadratic(p: int, A0: int, c) -> Number:
    c = _exact(c)
    return (
        (p * A0 + p * p - 16 + 4 * _inv(p)) * c**2
        + ((p + 1) * A0 + p * p - 8 * p - 18) * c
        + A0 - 14
    )


def double_clause2_rhs(p: int) -> Fraction:
    return Fraction(-p**4 + 21 * p**3 + 18 * p**2 + 16 * p - 4, 2 * p * p * (p + 1))


def trace_mode_c_threshold(p: int, A0: int, double: bool = False) -> float | None:
    """Smallest c >= 0 from which the trace-mode quadratic condition holds for all larger c.

    Returns 0.0 if it holds everywhere on c > 0 and None if it fails for large c.
    """
    quad = double_quadratic if double else single_quadratic
    q0, q1, q2 = (float(quad(p, A0, Fraction(x))) for x in (0, 1, 2))
    # recover coefficients of k2 c^2 + k1 c + k0 from three evaluations
    k0 = q0
    k2 = (q2 - 2 * q1 + q0) / 2
    k1 = q1 - q0 - k2
    if k2 < 0 or (k2 == 0 and k1 < 0):
        return None
    if k2 == 0:
        if k1 == 0:
            return 0.0 if k0 >= 0 else None
        return max(0.0, -k0 / k1)
    disc = k1 * k1 - 4 * k2 * k0
    if disc < 0:
        return 0.0
    return max(0.0, (-k1 + math.sqrt(disc)) / (2 * k2))


def _is_inverse_of(c, P: int) -> bool:
    if isinstance(c, (int, Rational)):
        return Fraction(c) == Fraction(1, P)
    return math.isclose(float(c), 1.0 / P, rel_tol=1e-12)


def minimax_estimated(
    n: int, p: int, ridge: RidgeConfig, double: bool = False, c=None
) -> MinimaxVerdict:
    """Sufficient conditions for minimaxity of the estimators with SURE weights.

    ``c`` may be given as an exact ``Fraction``; otherwise ``ridge.c`` is used.
    """
    if n < 2:
        raise DimensionError("n must be at least 2")
    P, A0 = _min_dim(n, p)
    c = ridge.c if c is None else c
    tag = "thm:dmin" if double else "thm:min"

    if ridge.mode is RidgeMode.CONSTANT:
        if double:
            return MinimaxVerdict(False, f"{tag}(none)", 0, "not-covered",
                                  {"reason": "no constant-ridge clause for the double estimator"})
        margin = A0 - 10
        ok = margin >= 0
        return MinimaxVerdict(ok, f"{tag}(i)", margin, "minimax" if ok else "not-covered", {"A0": A0})

    quad = double_quadratic if double else single_quadratic
    q = quad(P, A0, c)
    rhs = (double_rhs if double else single_rhs)(P, c)
    details: dict = {"A0": A0, "P": P, "quadratic": q, "rhs": rhs}
    verdict = MinimaxVerdict(q >= 0, f"{tag}(i)" if double else f"{tag}(ii)", q,
                             "minimax" if q >= 0 else "not-covered", details)
    if _is_inverse_of(c, P):
        rhs = double_clause2_rhs(P) if double else single_clause3_rhs(P)
        margin = A0 - rhs
        details["clause_rhs"] = rhs
        cid = f"{tag}(ii)" if double else f"{tag}(iii)"
        verdict = MinimaxVerdict(margin >= 0, cid, margin,
                                 "minimax" if margin >= 0 else "not-covered", details)
    return verdict


# --------------------------------------------------------------------------
# Bayes-optimal weights


@dataclass(frozen=True, slots=True)
class BayesWeights:
    a_star: float
    b_star: float


def _psi_inverse_quadratic_forms(psi: Array, vecs: Array) -> tuple[float, Array]:
    """Return tr(Psi^{-1}) and h_i^T Psi^{-1} h_i for the columns h_i of ``vecs``."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim == 1:
        if np.any(psi <= 0):
            raise CovarianceError("Psi eigenvalues must be positive")
        inv = 1.0 / psi
        return float(inv.sum()), np.einsum("ij,i,ij->j", vecs, inv, vecs)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise DimensionError("Psi must be a vector or a square matrix")
    vals = np.linalg.eigvalsh(0.5 * (psi + psi.T))
    if vals[0] <= 0:
        raise CovarianceError("Psi is not positive definite")
    sol = np.linalg.solve(psi, vecs)
    return float(np.sum(1.0 / vals)), np.einsum("ij,ij->j", vecs, sol)


def bayes_optimal_weights(spec: Spectrum, ridge: RidgeConfig, psi: Array, a_hat: float) -> BayesWeights:
    """Loss-minimizing (a*, b*) under the prior Psi = I + Lambda for the given data."""
    if spec.p > spec.n - 1:
        raise SettingError("Bayes-optimal weights need n - 1 >= p")
    if np.asarray(psi).shape[0] != spec.p:
        raise DimensionError(f"Psi must have dimension {spec.p}")
    alpha = ridge.alpha_hat(spec.trW)
    t = traces_from_eigenvalues(spec.ev, alpha)
    tr_psi_inv, d = _psi_inverse_quadratic_forms(psi, spec.left_vecs)
    r = 1.0 / (spec.ev + alpha)
    a_star = (tr_psi_inv - alpha * float(np.sum(r * d))) / t.trV2W
    b_star = -a_hat * t.trVW + float(np.sum(spec.ev * d))
    return BayesWeights(a_star, b_star)
