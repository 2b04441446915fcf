"""Monte Carlo risk tables for the shrinkage estimators.

Randomness comes from counter-based Philox streams keyed by
``(seed, setting index, replication)``, so results do not depend on how
replications are distributed over worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, SettingError, ShrinkageError
from .estimators import ESTIMATOR_IDS, PAPER_SIX, estimate
from .matmodel import DataMatrix, center_and_whiten

__all__ = [
    "ProfileKind",
    "MeanProfile",
    "NoiseKind",
    "ExperimentConfig",
    "RiskTable",
    "stream",
    "ramp_singular_values",
    "make_mean",
    "sample_noise",
    "sample_data",
    "loss",
    "run_experiment",
    "summarize",
    "PAPER_SIZES",
]

Array = NDArray[np.float64]

PAPER_SIZES: tuple[tuple[int, int], ...] = (
    (100, 10), (100, 30), (100, 80), (101, 100), (10, 100), (30, 100), (80, 100),
)

# stream tags keep the mean-matrix frames and the noise independent
_FRAME_TAG = 0
_NOISE_TAG = 1


class ProfileKind(str, Enum):
    RAMP5 = "ramp5"
    RAMP10 = "ramp10"


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    T3 = "t3"
    CHISQ2 = "chisq2"


@dataclass(frozen=True, slots=True)
class MeanProfile:
    """Singular values of the mean matrix: a linear ramp followed by a flat tail.

    ``tail="pow10"`` puts the tail at 10**q; ``tail="min_np"`` uses min(n, p)**q.
    """

    kind: ProfileKind = ProfileKind.RAMP5
    q: float = -1.0
    tail: str = "pow10"

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.tail not in ("pow10", "min_np"):
            raise SettingError(f"unknown tail rule {self.tail!r}")

    @property
    def divisor(self) -> int:
        return 5 if self.kind is ProfileKind.RAMP5 else 10

    @property
    def base(self) -> float:
        return 10.0 if self.kind is ProfileKind.RAMP5 else 100.0


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for a (seed, key...) address."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def ramp_singular_values(n: int, p: int, profile: MeanProfile) -> Array:
    k = min(n, p)
    lead = k // profile.divisor
    if lead < 1:
        raise DimensionError(f"min(n, p) = {k} leaves no leading singular value for {profile.kind.value}")
    if lead == 1:
        ramp = np.array([profile.base])
    else:
        ramp = profile.base + profile.base * np.arange(lead) / (lead - 1)
    tail_value = 10.0**profile.q if profile.tail == "pow10" else float(k) ** profile.q
    s = np.concatenate([ramp, np.full(k - lead, tail_value)])
    return np.sort(s)[::-1]


def _haar_frame(rng: np.random.Generator, rows: int, cols: int) -> Array:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def make_mean(n: int, p: int, profile: MeanProfile, seed: int | np.random.Generator) -> Array:
    """p x n mean matrix U0 diag(s) V0^T with Haar-random orthonormal frames."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    s = ramp_singular_values(n, p, profile)
    k = s.size
    u0 = _haar_frame(rng, p, k)
    v0 = _haar_frame(rng, n, k)
    return (u0 * s) @ v0.T


def sample_noise(shape: tuple[int, int], noise: NoiseKind, rng: np.random.Generator) -> Array:
    noise = NoiseKind(noise)
    if noise is NoiseKind.GAUSSIAN:
        return rng.standard_normal(shape)
    if noise is NoiseKind.T3:
        return rng.standard_t(3, shape) * math.sqrt((3 - 2) / 3)
    return (rng.chisquare(2, shape) - 2.0) / math.sqrt(2 * 2)


def sample_data(theta: Array, noise: NoiseKind, seed: int | np.random.Generator) -> DataMatrix:
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    theta = np.asarray(theta, dtype=np.float64)
    return DataMatrix(theta + sample_noise(theta.shape, noise, rng))


def loss(theta_hat: Array, theta: Array, sigma: Array | None = None) -> float:
    """(np)^{-1} tr[(theta_hat - theta)^T Sigma^{-1} (theta_hat - theta)]."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta_hat.shape != theta.shape:
        raise DimensionError(f"shape mismatch {theta_hat.shape} vs {theta.shape}")
    d = theta_hat - theta
    p, n = d.shape
    if sigma is None:
        q = float(np.sum(d * d))
    else:
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.ndim == 1:
            q = float(np.sum(d * d / sigma[:, None]))
        else:
            q = float(np.sum(d * np.linalg.solve(sigma, d)))
    return q / (n * p)


@dataclass(frozen=True)
class ExperimentConfig:
    sizes: tuple[tuple[int, int], ...] = PAPER_SIZES
    profile: MeanProfile = field(default_factory=MeanProfile)
    noise: NoiseKind = NoiseKind.GAUSSIAN
    reps: int = 5000
    seed: int = 2021
    estimators: tuple[str, ...] = PAPER_SIX

    def __post_init__(self) -> None:
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        object.__setattr__(self, "sizes", tuple((int(n), int(p)) for n, p in self.sizes))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.reps < 1:
            raise SettingError("reps must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise SettingError("seed must fit in 64 bits")
        for n, p in self.sizes:
            if n < 2 or p < 1:
                raise SettingError(f"invalid size (n={n}, p={p})")
            ramp_singular_values(n, p, self.profile)
        known = set(ESTIMATOR_IDS) | {"identity", "S1plus", "D1plus"}
        unknown = [e for e in self.estimators if e not in known]
        if unknown:
            raise SettingError(f"unknown estimators: {', '.join(unknown)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        prof = doc.get("profile", {})
        kwargs = {}
        if "sizes" in doc:
            kwargs["sizes"] = tuple(tuple(s) for s in doc["sizes"])
        if "estimators" in doc:
            kwargs["estimators"] = tuple(doc["estimators"])
        for key in ("noise", "reps", "seed"):
            if key in doc:
                kwargs[key] = doc[key]
        profile = MeanProfile(
            kind=prof.get("kind", "ramp5"),
            q=float(prof.get("q", -1.0)),
            tail=prof.get("tail", "pow10"),
        )
        return cls(profile=profile, **kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "sizes": [list(s) for s in self.sizes],
            "profile": {"kind": self.profile.kind.value, "q": self.profile.q, "tail": self.profile.tail},
            "noise": self.noise.value,
            "reps": self.reps,
            "seed": int(self.seed),
            "estimators": list(self.estimators),
        }


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Mean loss and standard error per (n, p) row and estimator column.

    ``failures`` counts replications where an estimator raised; such cells
    average over the successful replications only.
    """

    sizes: tuple[tuple[int, int], ...]
    estimators: tuple[str, ...]
    mean: Array
    se: Array
    failures: NDArray[np.int64]
    reps: int

    def cell(self, size: tuple[int, int], estimator: str) -> tuple[float, float]:
        i = self.sizes.index(tuple(size))
        j = self.estimators.index(estimator)
        return float(self.mean[i, j]), float(self.se[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "p"] + [e for e in self.estimators] + [f"se_{e}" for e in self.estimators])
        for i, (n, p) in enumerate(self.sizes):
            w.writerow([n, p] + [repr(float(v)) for v in self.mean[i]] + [repr(float(v)) for v in self.se[i]])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'(n, p)':>11}" + "".join(f"{e:>10}" for e in self.estimators)
        lines = [head, "-" * len(head)]
        for i, (n, p) in enumerate(self.sizes):
            cells = []
            for j in range(len(self.estimators)):
                v = self.mean[i, j]
                txt = f"{v:.3g}" if v >= 10 else f"{v:.3f}"
                if self.failures[i, j]:
                    txt += "*"
                cells.append(f"{txt:>10}")
            lines.append(f"{f'({n}, {p})':>11}" + "".join(cells))
        if self.failures.any():
            lines.append("* some replications failed for this estimator")
        return "\n".join(lines) + "\n"


def _one_replication(cfg: ExperimentConfig, setting: int, rep: int) -> Array:
    n, p = cfg.sizes[setting]
    theta = make_mean(n, p, cfg.profile, stream(cfg.seed, setting, rep, _FRAME_TAG))
    data = sample_data(theta, cfg.noise, stream(cfg.seed, setting, rep, _NOISE_TAG))
    spec = center_and_whiten(data)
    out = np.full(len(cfg.estimators), np.nan)
    for j, eid in enumerate(cfg.estimators):
        try:
            out[j] = loss(estimate(spec, eid).theta_hat, theta)
        except ShrinkageError:
            pass
    return out


def _run_chunk(args: tuple[ExperimentConfig, int, int, int]) -> tuple[int, int, Array]:
    cfg, setting, start, stop = args
    block = np.stack([_one_replication(cfg, setting, r) for r in range(start, stop)])
    return setting, start, block


def _chunks(cfg: ExperimentConfig, size: int) -> list[tuple[ExperimentConfig, int, int, int]]:
    return [
        (cfg, s, start, min(start + size, cfg.reps))
        for s in range(len(cfg.sizes))
        for start in range(0, cfg.reps, size)
    ]


def run_experiment(cfg: ExperimentConfig, workers: int = 1, chunk: int = 50) -> RiskTable:
    """Simulate every (size, estimator) cell; bit-identical for any ``workers``."""
    losses = np.empty((len(cfg.sizes), cfg.reps, len(cfg.estimators)))
    jobs = _chunks(cfg, chunk)
    if workers <= 1:
        results = map(_run_chunk, jobs)
        for setting, start, block in results:
            losses[setting, start:start + block.shape[0]] = block
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for setting, start, block in pool.map(_run_chunk, jobs):
                losses[setting, start:start + block.shape[0]] = block
    return summarize(cfg, losses)


def summarize(cfg: ExperimentConfig, losses: Array) -> RiskTable:
    ok = np.isfinite(losses)
    count = ok.sum(axis=1)
    filled = np.where(ok, losses, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = filled.sum(axis=1) / count
        centered = np.where(ok, losses - mean[:, None, :], 0.0)
        var = (centered**2).sum(axis=1) / np.maximum(count - 1, 1)
        se = np.sqrt(var / count)
    se = np.where(count > 1, se, np.nan)
    return RiskTable(
        sizes=cfg.sizes,
        estimators=cfg.estimators,
        mean=mean,
        se=se,
        failures=(cfg.reps - count).astype(np.int64),
        reps=cfg.reps,
    )

