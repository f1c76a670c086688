"""Least-squares fitting over design matrices and the regression comparisons.

Errors are reported as the *sum* of absolute deviations over the evaluated
samples, not the mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import RankDeficiencyError
from .exprgen import DEFAULT_GUARD, Expression, domain_of, evaluate
from .featurize import DesignMatrix, FeatureSpec, build_design_matrix, poly_spec

__all__ = [
    "Dataset", "LinearModel", "FitReport",
    "fit_least_squares", "predict", "absolute_error", "split_indices",
    "train_test_split", "fit_polynomial", "make_dataset", "run_comparison",
    "reports_to_json", "write_error_table", "DEFAULT_RIDGE_FALLBACK",
]

DEFAULT_RIDGE_FALLBACK = 1e-10


@dataclass(frozen=True)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape != ys.shape:
            raise ValueError(f"xs and ys differ in length: {xs.size} vs {ys.size}")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return self.xs.size


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    spec: FeatureSpec
    ridge: float = 0.0
    condition_estimate: float = 1.0
    guard: float = DEFAULT_GUARD

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.spec.n_columns,):
            raise ValueError(f"expected {self.spec.n_columns} weights, got shape {w.shape}")
        if not np.isfinite(w).all() or not math.isfinite(self.intercept):
            raise ValueError("model weights must be finite")
        object.__setattr__(self, "weights", w)

    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.spec.column_names, self.weights.tolist()))


def fit_least_squares(X: DesignMatrix, y, ridge: float = 0.0) -> LinearModel:
    """Minimize ``||X w + b - y||^2 + ridge * ||w||^2``.

    The intercept ``b`` is fitted (unpenalized) when the spec includes a bias.
    Solved by QR factorization, never via the normal equations.  With
    ``ridge == 0`` a column-pivoted QR on unit-norm columns detects rank
    deficiency and raises :class:`RankDeficiencyError` naming the columns
    that are numerically dependent on the others.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    A = np.asarray(X.values, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    m, n = A.shape
    if m < 1:
        raise ValueError("design matrix has no rows")
    if y.size != m:
        raise ValueError(f"y has {y.size} values for {m} rows")
    names = X.spec.column_names

    if X.spec.include_bias:
        x_mean = A.mean(axis=0)
        y_mean = y.mean()
        A = A - x_mean
        y = y - y_mean
    else:
        x_mean = np.zeros(n)
        y_mean = 0.0

    if ridge == 0.0:
        scale = np.linalg.norm(A, axis=0)
        zero = scale == 0
        if zero.any():
            raise RankDeficiencyError(
                "design has constant columns", [names[j] for j in np.flatnonzero(zero)]
            )
        Q, R, piv = scipy.linalg.qr(A / scale, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(m, n) * np.finfo(float).eps * diag[0]
        rank = int(np.count_nonzero(diag > tol))
        if rank < n:
            dependent = [names[j] for j in piv[rank:]]
            raise RankDeficiencyError(
                f"design of rank {rank} < {n} columns; retry with ridge > 0", dependent
            )
        z = scipy.linalg.solve_triangular(R, Q.T @ y)
        w = np.empty(n)
        w[piv] = z
        w /= scale
    else:
        aug = np.vstack([A, math.sqrt(ridge) * np.eye(n)])
        rhs = np.concatenate([y, np.zeros(n)])
        Q, R = scipy.linalg.qr(aug, mode="economic")
        w = scipy.linalg.solve_triangular(R, Q.T @ rhs)
        diag = np.abs(np.diag(R))

    cond = float(diag.max() / diag.min()) if diag.min() > 0 else math.inf
    intercept = float(y_mean - x_mean @ w)
    return LinearModel(w, intercept, X.spec, ridge, cond)


def predict(model: LinearModel, xs, guard: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Predictions on the rows of ``xs`` the model's spec can evaluate, plus their indices."""
    dm = build_design_matrix(model.spec, xs, model.guard if guard is None else guard)
    return dm.values @ model.weights + model.intercept, dm.kept_row_indices


def absolute_error(pred, y) -> float:
    """Sum of ``|pred - y|``."""
    pred = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred.size != y.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {y.size} targets")
    if pred.size == 0:
        raise ValueError("absolute_error needs at least one value")
    return float(np.abs(pred - y).sum())


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle of ``range(n)`` cut into (train, test) index arrays, each sorted.

    The test part has ``round(n * test_fraction)`` entries (halves round up),
    kept within ``1..n-1``.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if n < 2:
        raise ValueError(f"need at least 2 samples to split, got {n}")
    n_test = min(max(int(math.floor(n * test_fraction + 0.5)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def train_test_split(d: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    train, test = split_indices(len(d), test_fraction, seed)
    return Dataset(d.xs[train], d.ys[train]), Dataset(d.xs[test], d.ys[test])


def fit_polynomial(d: Dataset, degree: int, ridge: float = 0.0) -> LinearModel:
    X = build_design_matrix(poly_spec(degree), d.xs)
    return fit_least_squares(X, d.ys[X.kept_row_indices], ridge)


def make_dataset(expr: Expression, lower: float, upper: float, step: float,
                 guard: float = DEFAULT_GUARD) -> Dataset:
    """Evaluate ``expr`` on a step grid over its guarded domain within ``[lower, upper]``."""
    xs = domain_of(expr, lower, upper, guard).grid(step)
    return Dataset(xs, evaluate(expr, xs, guard))


@dataclass
class FitReport:
    spec_name: str
    train_abs_error: float
    test_abs_error: float
    n_train: int
    n_test: int
    dropped_rows: int
    condition_estimate: float
    seed: int
    ridge: float
    test_fraction: float
    ridge_fallback: bool = False
    model: LinearModel | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "spec_name": self.spec_name,
            "train_abs_error": self.train_abs_error,
            "test_abs_error": self.test_abs_error,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "dropped_rows": self.dropped_rows,
            "seed": self.seed,
            "ridge": self.ridge,
            "test_fraction": self.test_fraction,
            "ridge_fallback": self.ridge_fallback,
            "condition_estimate": self.condition_estimate,
            "intercept": bool(self.model.spec.include_bias) if self.model else None,
            "error_metric": "sum_abs",
        }


def _fit_with_fallback(X: DesignMatrix, y, ridge: float, ridge_fallback: float | None):
    try:
        return fit_least_squares(X, y, ridge), False
    except RankDeficiencyError:
        if ridge > 0 or not ridge_fallback:
            raise
        return fit_least_squares(X, y, ridge_fallback), True


def run_comparison(
    expr: Expression,
    lower: float,
    upper: float,
    step: float,
    specs: Sequence[FeatureSpec],
    seed: int = 0,
    test_fraction: float = 0.2,
    guard: float = DEFAULT_GUARD,
    ridge: float = 0.0,
    ridge_fallback: float | None = DEFAULT_RIDGE_FALLBACK,
) -> list[FitReport]:
    """Fit every spec on one shared train split of ``expr``'s data; report errors on the test split.

    A rank-deficient fit is retried once with ``ridge_fallback`` (set it to
    ``None`` to let :class:`RankDeficiencyError` propagate); the report flags it.
    """
    data = make_dataset(expr, lower, upper, step, guard)
    train, test = train_test_split(data, test_fraction, seed)
    reports = []
    for spec in specs:
        X_train = build_design_matrix(spec, train.xs, guard)
        X_test = build_design_matrix(spec, test.xs, guard)
        y_train = train.ys[X_train.kept_row_indices]
        y_test = test.ys[X_test.kept_row_indices]
        model, fell_back = _fit_with_fallback(X_train, y_train, ridge, ridge_fallback)
        reports.append(FitReport(
            spec_name=spec.name,
            train_abs_error=absolute_error(X_train.values @ model.weights + model.intercept, y_train),
            test_abs_error=absolute_error(X_test.values @ model.weights + model.intercept, y_test),
            n_train=X_train.rows,
            n_test=X_test.rows,
            dropped_rows=X_train.dropped_rows + X_test.dropped_rows,
            condition_estimate=model.condition_estimate,
            seed=seed,
            ridge=model.ridge,
            test_fraction=test_fraction,
            ridge_fallback=fell_back,
            model=model,
        ))
    return reports


def reports_to_json(reports: Sequence[FitReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def write_error_table(reports: Sequence[FitReport], path) -> None:
    """Two-column table (algorithm, absolute error) with full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "absolute_error"])
        for r in reports:
            w.writerow([r.spec_name, format(r.test_abs_error, ".17g")])
