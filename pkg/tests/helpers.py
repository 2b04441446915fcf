"""Builders for data matrices with a prescribed centered spectrum."""

from __future__ import annotations

import numpy as np
from scipy.linalg import helmert

from ridgeshrink.matmodel import DataMatrix, Spectrum, center_and_whiten


def data_with_spectrum(ev, n: int, p: int, seed: int = 0, shift: float = 0.0) -> DataMatrix:
    """p x n data whose centered Gram eigenvalues are ``ev`` (padded with zeros)."""
    ev = np.asarray(ev, dtype=np.float64)
    m = min(p, n - 1)
    sv = np.zeros(m)
    sv[: ev.size] = np.sqrt(ev)
    rng = np.random.default_rng(seed)
    left = np.linalg.qr(rng.standard_normal((p, m)))[0]
    inner = np.linalg.qr(rng.standard_normal((n - 1, m)))[0]
    right = helmert(n).T @ inner  # orthonormal columns orthogonal to the ones vector
    row_means = shift + rng.standard_normal(p)
    return DataMatrix((left * sv) @ right.T + row_means[:, None])


def spectrum_with(ev, n: int, p: int, seed: int = 0) -> Spectrum:
    return center_and_whiten(data_with_spectrum(ev, n, p, seed))
