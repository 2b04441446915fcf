"""High-dimensional consistency checks under the Gaussian prior model.

Under the prior the centered data reduce to ``Y`` with i.i.d. ``N(0, Psi)``
columns, ``Psi = I + Lambda``. ``rmt_trial`` measures how far the SURE weights
are from the Bayes-optimal ones; ``mp_stieltjes_identity`` and ``esd_traces``
compare resolvent traces of ``W/(n-1)`` with their Marchenko-Pastur limit when
``Psi = I``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import helmert

from .errors import DimensionError, SettingError
from .estimators import estimate_a_single, estimate_b_double
from .matmodel import DataMatrix, RidgeConfig, RidgeMode, Spectrum, center_and_whiten
from .simlab import stream
from .sure import bayes_optimal_weights

__all__ = [
    "PriorSpec",
    "ConvergenceRecord",
    "rmt_trial",
    "rmt_sweep",
    "records_to_csv",
    "median_gaps",
    "mp_stieltjes_identity",
    "esd_traces",
    "identity_spectrum",
]

Array = NDArray[np.float64]

# stream tag for trial draws, kept apart from the simulation tags
_RMT_TAG = 7


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Eigenvalues of the marginal covariance Psi = I + Lambda (all >= 1)."""

    psi_eigs: Array

    def __post_init__(self) -> None:
        e = np.asarray(self.psi_eigs, dtype=np.float64)
        if e.ndim != 1 or e.size == 0:
            raise DimensionError("psi_eigs must be a non-empty vector")
        if not np.all(np.isfinite(e)) or np.min(e) < 1.0:
            raise SettingError("Psi = I + Lambda needs eigenvalues >= 1")
        object.__setattr__(self, "psi_eigs", e)

    @property
    def p(self) -> int:
        return self.psi_eigs.size

    @classmethod
    def uniform_quantiles(cls, p: int, lo: float = 1.0, hi: float = 3.0) -> "PriorSpec":
        """Midpoint quantiles of Uniform[lo, hi]; deterministic so H_p converges."""
        if p < 1:
            raise DimensionError("p must be positive")
        if not 1.0 <= lo <= hi:
            raise SettingError("need 1 <= lo <= hi")
        j = np.arange(1, p + 1)
        return cls(lo + (hi - lo) * (j - 0.5) / p)

    @classmethod
    def identity(cls, p: int) -> "PriorSpec":
        return cls(np.ones(p))


@dataclass(frozen=True, slots=True)
class ConvergenceRecord:
    n: int
    p: int
    gamma: float
    a_hat: float
    a_star: float
    b_hat: float
    b_star: float
    gap_a: float
    gap_b: float
    seed: int = 0


def _prior_spectrum(n: int, prior: PriorSpec, rng: np.random.Generator) -> Spectrum:
    p = prior.p
    y = rng.standard_normal((p, n - 1)) * np.sqrt(prior.psi_eigs)[:, None]
    # rows of the Helmert block are orthonormal and orthogonal to the ones vector,
    # so X - Xbar = Y H exactly and W = Y Y^T
    x = y @ helmert(n)
    return center_and_whiten(DataMatrix(x))


def rmt_trial(n: int, p: int, prior: PriorSpec, ridge: RidgeConfig | None = None, seed: int = 0) -> ConvergenceRecord:
    """One draw from the prior model; ``ridge`` defaults to alpha = tr W / p."""
    if p > n - 1:
        raise SettingError(f"consistency trials need n - 1 >= p, got n={n}, p={p}")
    if prior.p != p:
        raise DimensionError(f"prior has dimension {prior.p}, expected {p}")
    ridge = RidgeConfig(RidgeMode.TRACE, 1.0 / p) if ridge is None else ridge
    if ridge.mode is not RidgeMode.TRACE:
        raise SettingError("alpha/n must tend to a positive constant; use the trace-proportional ridge")

    spec = _prior_spectrum(n, prior, stream(seed, _RMT_TAG, n, p))
    a_hat = estimate_a_single(spec, ridge)
    b_hat = estimate_b_double(spec, ridge, a_hat)
    opt = bayes_optimal_weights(spec, ridge, prior.psi_eigs, a_hat)
    return ConvergenceRecord(
        n=n,
        p=p,
        gamma=p / n,
        a_hat=a_hat,
        a_star=opt.a_star,
        b_hat=b_hat,
        b_star=opt.b_star,
        gap_a=abs(a_hat - opt.a_star) / n,
        gap_b=abs(b_hat - opt.b_star) / spec.trW,
        seed=seed,
    )


def _trial_job(args: tuple[int, int, float, float, int]) -> ConvergenceRecord:
    n, p, lo, hi, seed = args
    return rmt_trial(n, p, PriorSpec.uniform_quantiles(p, lo, hi), seed=seed)


def rmt_sweep(
    sizes: Iterable[tuple[int, int]],
    seeds: Iterable[int],
    lo: float = 1.0,
    hi: float = 3.0,
    workers: int = 1,
) -> list[ConvergenceRecord]:
    """Trials over every (size, seed) pair with a fixed-quantile Uniform[lo, hi] prior.

    Records come back in (size, seed) order whatever the worker count.
    """
    jobs = [(n, p, lo, hi, s) for (n, p) in sizes for s in seeds]
    if workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs))


def records_to_csv(records: Iterable[ConvergenceRecord]) -> str:
    cols = ("n", "p", "gamma", "gap_a", "gap_b", "seed")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for rec in records:
        vals = [getattr(rec, c) for c in cols]
        writer.writerow([repr(v) if isinstance(v, float) else v for v in vals])
    return buf.getvalue()


def median_gaps(records: Iterable[ConvergenceRecord]) -> dict[tuple[int, int], tuple[float, float]]:
    """Median (gap_a, gap_b) per (n, p)."""
    by_size: dict[tuple[int, int], list[ConvergenceRecord]] = {}
    for rec in records:
        by_size.setdefault((rec.n, rec.p), []).append(rec)
    return {
        k: (float(np.median([r.gap_a for r in v])), float(np.median([r.gap_b for r in v])))
        for k, v in by_size.items()
    }


def mp_stieltjes_identity(gamma: float, x: float) -> float:
    """Marchenko-Pastur Stieltjes transform at -x for ratio gamma and unit variance.

    The value m solves ``gamma x m^2 + (1 - gamma + x) m - 1 = 0``; the positive root
    is the one inside ``[1/(1 + x), 1/x]``.
    """
    if not (gamma > 0 and math.isfinite(gamma)):
        raise SettingError("gamma must be a positive finite ratio")
    if gamma == 1:
        raise SettingError("gamma = 1 is excluded")
    if not x > 0:
        raise SettingError("x must be positive")
    b = 1.0 - gamma + x
    qa = gamma * x
    disc = math.sqrt(b * b + 4.0 * qa)
    # 2/(b + disc) is the positive root written without cancellation
    return 2.0 / (b + disc) if b >= 0 else (disc - b) / (2.0 * qa)


def esd_traces(spec: Spectrum, x: float) -> tuple[float, float]:
    """(p^-1 tr[(W/(n-1) + xI)^-1], p^-1 tr[(W/(n-1) + xI)^-2]) over all p eigenvalues."""
    if not x > 0:
        raise SettingError("x must be positive")
    lam = spec.ev / (spec.n - 1)
    zeros = spec.p - lam.size
    r = 1.0 / (lam + x)
    t1 = (float(r.sum()) + zeros / x) / spec.p
    t2 = (float((r * r).sum()) + zeros / x**2) / spec.p
    return t1, t2


def identity_spectrum(n: int, p: int, seed: int = 0) -> Spectrum:
    """Spectrum of a draw from the Psi = I model (pure noise)."""
    if n < 2:
        raise DimensionError("n must be at least 2")
    return _prior_spectrum(n, PriorSpec.identity(p), stream(seed, _RMT_TAG, n, p))
