"""Command-line entry point.

Exit codes: 0 on success, 1 for usage and configuration errors, 2 for data or
numeric errors (unreadable matrices, degenerate spectra, invalid covariance).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShrinkageError, SettingError
from .estimators import (
    ESTIMATOR_IDS,
    EstimateReport,
    Weights,
    default_ridge,
    estimate,
    ridge_shrinkage,
)
from .matmodel import DataMatrix, RidgeConfig, RidgeMode, center_and_whiten
from .rmt import records_to_csv, rmt_sweep
from .simlab import ExperimentConfig, run_experiment
from .sure import minimax_estimated, minimax_known, sure_delta, sure_estimated

__all__ = ["main", "build_parser", "read_matrix_csv", "UsageError", "DataError"]

_RIDGE_IDS = ("S1", "S2", "D1", "D2", "S1plus", "S2plus", "D1plus", "D2plus")
_CLI_ESTIMATORS = tuple(ESTIMATOR_IDS) + ("S1plus", "D1plus", "identity")
_BUNDLED = ("table1", "table2", "table3", "table4", "table5", "table6", "smoke")
_DEFAULT_SWEEP = "100x50,200x100,400x200,800x400"


class UsageError(Exception):
    """Bad flags or configuration (exit 1)."""


class DataError(Exception):
    """Unreadable input data (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; we reserve 2 for data errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# input helpers


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a headerless numeric CSV, reporting the first bad cell by row and column."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DataError(f"{path}: file is empty")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row, start=1):
            try:
                out[i - 1, j - 1] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j}: not a number: {cell.strip()!r}") from None
            if not np.isfinite(out[i - 1, j - 1]):
                raise DataError(f"{path}: row {i}, column {j}: non-finite value")
    return out


def _read_sigma(path: str | None, p: int) -> np.ndarray | None:
    if path is None:
        return None
    s = read_matrix_csv(path)
    if s.shape == (p, p):
        return s
    if s.size == p and 1 in s.shape:
        return s.ravel()
    raise DataError(f"{path}: covariance must be {p}x{p} or a vector of length {p}, got {s.shape[0]}x{s.shape[1]}")


def _parse_number(text: str):
    """Accept ints, fractions like 1/22, and floats; keep exact values exact."""
    try:
        return Fraction(text) if "/" in text or text.lstrip("+-").isdigit() else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        try:
            n, p = part.lower().split("x")
            out.append((int(n), int(p)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"sizes look like 200x100,400x200; got {part!r}") from None
    return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _ridge_from_args(args, eid: str, m: int) -> RidgeConfig:
    if args.ridge_mode is None:
        c = None if args.c is None else float(args.c)
        return default_ridge(eid, m, c)
    mode = RidgeMode(args.ridge_mode)
    if args.c is not None:
        c = float(args.c)
    else:
        c = 1.0 if mode is RidgeMode.CONSTANT else 1.0 / m
    return RidgeConfig(mode, c)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_estimate(args) -> int:
    x = read_matrix_csv(args.matrix)
    data = DataMatrix(x, _read_sigma(args.sigma, x.shape[0]))
    spec = center_and_whiten(data)
    eid = args.estimator
    if eid in _RIDGE_IDS and args.ridge_mode is not None:
        ridge = _ridge_from_args(args, eid, spec.m)
        report: EstimateReport = ridge_shrinkage(
            spec, ridge, double=eid.startswith("D"), positive_part=eid.endswith("plus"), estimator_id=eid
        )
    else:
        report = estimate(spec, eid, None if args.c is None else float(args.c))

    out = Path(args.out)
    buf = "\n".join(",".join(repr(float(v)) for v in row) for row in report.theta_hat) + "\n"
    _write(out.with_suffix(".csv"), buf)
    side = {
        "estimator": report.estimator_id,
        "n": data.n,
        "p": data.p,
        "weights": None if report.weights is None else {"a": report.weights.a, "b": report.weights.b},
        "alpha_hat": report.alpha_hat,
        "multipliers": _jsonable(report.factors),
        "singular_values": _jsonable(spec.sv),
        "sure_delta": report.sure_delta,
        "warnings": list(report.warnings),
    }
    _write(out.with_suffix(".json"), json.dumps(side, indent=2) + "\n")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.json')}")
    return 0


def cmd_sure(args) -> int:
    x = read_matrix_csv(args.matrix)
    data = DataMatrix(x, _read_sigma(args.sigma, x.shape[0]))
    spec = center_and_whiten(data)
    ridge = _ridge_from_args(args, "S2", spec.m)
    result: dict = {
        "convention": "Delta estimates n*p*(risk(estimator) - risk(X)); negative means better than X",
        "n": data.n,
        "p": data.p,
        "ridge_mode": ridge.mode.value,
        "c": ridge.c,
        "alpha_hat": ridge.alpha_hat(spec.trW),
    }
    if args.a is not None:
        w = Weights(float(args.a), float(args.b or 0.0))
        result["fixed_weights"] = {"a": w.a, "b": w.b, "delta": sure_delta(spec, ridge, w)}
    else:
        single = ridge_shrinkage(spec, ridge, double=False, positive_part=False)
        double = ridge_shrinkage(spec, ridge, double=True, positive_part=False)
        result["single"] = {"a_hat": single.weights.a, "delta": sure_estimated(spec, ridge, False)}
        result["double"] = {
            "a_hat": double.weights.a,
            "b_hat": double.weights.b,
            "delta": sure_estimated(spec, ridge, True),
        }
    print(json.dumps(result, indent=2))
    return 0


def cmd_minimax(args) -> int:
    if args.c is None:
        raise UsageError("--c is required")
    c = args.c
    if c <= 0:
        raise UsageError("--c must be positive")
    ridge = RidgeConfig(RidgeMode(args.ridge_mode), float(c))
    if args.b is not None and args.a is None:
        raise UsageError("--b needs --a")
    if args.a is not None:
        w = Weights(args.a, args.b if args.b is not None else 0)
        c0 = 0 if ridge.mode is RidgeMode.CONSTANT else c
        verdict = minimax_known(args.n, args.p, ridge, w, c0=c0)
    else:
        verdict = minimax_estimated(args.n, args.p, ridge, double=args.double, c=c)
    print(f"clause: {verdict.condition_id}  margin: {float(verdict.margin):.6g}  verdict: {verdict.status}")
    doc = {
        "n": args.n,
        "p": args.p,
        "ridge_mode": ridge.mode.value,
        "c": _jsonable(c),
        "double": bool(args.double),
        "condition": verdict.condition_id,
        "margin": _jsonable(verdict.margin),
        "verdict": verdict.status,
        "details": _jsonable(verdict.details),
    }
    print(json.dumps(doc))
    return 0


def _load_config(name: str) -> ExperimentConfig:
    path = Path(name)
    try:
        if path.exists():
            return ExperimentConfig.from_json(path)
        if name in _BUNDLED:
            text = resources.files("ridgeshrink").joinpath("configs", f"{name}.json").read_text()
            return ExperimentConfig.from_dict(json.loads(text))
    except (json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
        raise UsageError(f"invalid config {name}: {exc}") from exc
    raise UsageError(f"no config file {name!r}; bundled configs: {', '.join(_BUNDLED)}")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    doc = cfg.to_dict()
    if args.reps is not None:
        doc["reps"] = args.reps
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        cfg = ExperimentConfig.from_dict(doc)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    start = time.perf_counter()
    table = run_experiment(cfg, workers=args.workers)
    wall = time.perf_counter() - start
    out = Path(args.out)
    _write(out.with_suffix(".csv"), table.to_csv())
    _write(out.with_suffix(".txt"), table.to_text())
    print(table.to_text(), end="")
    print(f"replications: {cfg.reps * len(cfg.sizes)} ({cfg.reps} per setting), wall time {wall:.1f}s")
    return 0


def cmd_rmt(args) -> int:
    seeds = range(args.seed, args.seed + args.seeds)
    for n, p in args.sizes:
        if p > n - 1:
            raise UsageError(f"size {n}x{p}: need n - 1 >= p")
    recs = rmt_sweep(args.sizes, seeds, workers=args.workers)
    text = records_to_csv(recs)
    if args.out:
        _write(Path(args.out).with_suffix(".csv"), text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ridgeshrink", description="Ridge-type shrinkage estimation of a normal mean matrix.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def ridge_flags(sp):
        sp.add_argument("--ridge-mode", choices=[m.value for m in RidgeMode], default=None)
        sp.add_argument("--c", type=_parse_number, default=None, help="ridge constant (e.g. 0.5 or 1/22)")
        sp.add_argument("--sigma", default=None, help="p x p covariance CSV or variance vector file")

    sp = sub.add_parser("estimate", help="estimate the mean matrix of a p x n CSV")
    sp.add_argument("matrix")
    sp.add_argument("--estimator", choices=_CLI_ESTIMATORS, default="S2plus")
    ridge_flags(sp)
    sp.add_argument("--out", default="estimate", help="output prefix for .csv and .json")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("sure", help="unbiased risk-difference estimates for ridge shrinkage")
    sp.add_argument("matrix")
    ridge_flags(sp)
    sp.add_argument("--a", type=float, default=None, help="fixed weight a (otherwise estimated)")
    sp.add_argument("--b", type=float, default=None, help="fixed weight b (with --a)")
    sp.set_defaults(func=cmd_sure)

    sp = sub.add_parser("minimax-check", help="check sufficient minimaxity conditions")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--p", type=_positive_int, required=True)
    sp.add_argument("--ridge-mode", choices=[m.value for m in RidgeMode], default="trace")
    sp.add_argument("--c", type=_parse_number, default=None)
    sp.add_argument("--double", action="store_true")
    sp.add_argument("--a", type=_parse_number, default=None, help="known weight a")
    sp.add_argument("--b", type=_parse_number, default=None, help="known weight b")
    sp.set_defaults(func=cmd_minimax)

    sp = sub.add_parser("simulate", help="Monte Carlo risk table")
    sp.add_argument("config", help=f"JSON config path or bundled name ({', '.join(_BUNDLED)})")
    sp.add_argument("--out", default="risk", help="output prefix for .csv and .txt")
    sp.add_argument("--reps", type=_positive_int, default=None)
    sp.add_argument("--seed", type=_seed, default=None)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("rmt-sweep", help="SURE vs Bayes-optimal weight gaps over a size sweep")
    sp.add_argument("--sizes", type=_sizes, default=_sizes(_DEFAULT_SWEEP))
    sp.add_argument("--seeds", type=_positive_int, default=20, help="number of seeds per size")
    sp.add_argument("--seed", type=_seed, default=0, help="first seed")
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--out", default=None, help="output prefix (CSV to stdout if omitted)")
    sp.set_defaults(func=cmd_rmt)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ridgeshrink: error: {exc}", file=sys.stderr)
        return 1
    except SettingError as exc:
        print(f"ridgeshrink: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ShrinkageError) as exc:
        print(f"ridgeshrink: error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ridgeshrink: numeric error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
