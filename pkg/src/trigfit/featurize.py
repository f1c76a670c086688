"""Feature specifications and design matrices.

A :class:`FeatureSpec` lists the product of base features that defines each
column.  :func:`build_design_matrix` evaluates a spec on sample points and
drops every row where some column is undefined or non-finite, remembering
which input indices survived.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyDesignError
from .exprgen import (
    COS, DEFAULT_GUARD, SIN, BaseFeature, Expression, Kind, Term, _feature_key,
    mixed_pool, xpow,
)

__all__ = [
    "FeatureSpec", "DesignMatrix", "canonical_factors", "column_name",
    "trig_spec", "poly_spec", "linear_spec", "product_spec",
    "build_design_matrix", "write_design_csv",
]


def canonical_factors(factors: Sequence[BaseFeature]) -> tuple[BaseFeature, ...]:
    """Merge powers of x into one ``x^k`` and sort the remaining factors.

    Two products are the same function exactly when their canonical factors
    are equal.
    """
    power = sum(f.power for f in factors if f.kind is Kind.XPOW)
    rest = sorted((f for f in factors if f.kind is not Kind.XPOW), key=_feature_key)
    return ((xpow(power),) if power else ()) + tuple(rest)


def column_name(factors: Sequence[BaseFeature]) -> str:
    return "*".join(f.name for f in factors)


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    features: tuple[tuple[BaseFeature, ...], ...]
    include_bias: bool = True

    def __post_init__(self):
        features = tuple(tuple(f) for f in self.features)
        if any(not f for f in features):
            raise ValueError("every column needs at least one factor")
        keys = [canonical_factors(f) for f in features]
        if len(set(keys)) != len(keys):
            dup = next(column_name(k) for k in keys if keys.count(k) > 1)
            raise ValueError(f"duplicate column {dup!r} in spec {self.name!r}")
        object.__setattr__(self, "features", features)

    @property
    def n_columns(self) -> int:
        return len(self.features)

    @property
    def column_names(self) -> list[str]:
        return [column_name(f) for f in self.features]

    def as_expressions(self) -> list[Expression]:
        """Each column as a unit-coefficient single-term expression."""
        return [Expression((Term(1, f),)) for f in self.features]

    def without_bias(self) -> FeatureSpec:
        return FeatureSpec(self.name, self.features, include_bias=False)


def trig_spec(include_bias: bool = True) -> FeatureSpec:
    return FeatureSpec("trig", ((SIN,), (COS,), (SIN, COS)), include_bias)


def poly_spec(degree: int, include_bias: bool = True) -> FeatureSpec:
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    return FeatureSpec(f"poly:{degree}", tuple((xpow(k),) for k in range(1, degree + 1)), include_bias)


def linear_spec(include_bias: bool = True) -> FeatureSpec:
    """Plain linear regression on x."""
    return FeatureSpec("linear", ((xpow(1),),), include_bias)


def product_spec(degree: int, max_order: int = 6, include_bias: bool = True) -> FeatureSpec:
    """All products of 1..max_order factors (with repetition) from the mixed pool.

    Products that canonicalize to the same function are kept once.  Columns
    are ordered by canonical factor count, then by factor names.
    """
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    pool = mixed_pool(degree)
    seen = set()
    for order in range(1, max_order + 1):
        for combo in itertools.combinations_with_replacement(pool, order):
            seen.add(canonical_factors(combo))
    columns = sorted(seen, key=lambda c: (len(c), tuple(f.name for f in c)))
    return FeatureSpec(f"product:{degree}:{max_order}", tuple(columns), include_bias)


@dataclass(frozen=True)
class DesignMatrix:
    spec: FeatureSpec
    values: np.ndarray
    kept_row_indices: np.ndarray
    xs: np.ndarray = field(repr=False)
    n_input: int = 0

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def dropped_rows(self) -> int:
        return self.n_input - self.rows


def build_design_matrix(spec: FeatureSpec, xs, guard: float = DEFAULT_GUARD) -> DesignMatrix:
    """Evaluate ``spec`` on ``xs``.

    A row is dropped when any factor's guarded domain excludes its x or any
    column value is non-finite.  Raises :class:`EmptyDesignError` if nothing
    is left.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise ValueError("xs is empty")
    base = {}
    keep = np.isfinite(xs)
    with np.errstate(all="ignore"):
        for feature in {f for col in spec.features for f in col}:
            base[feature] = feature(xs)
            keep &= feature.valid(xs, guard)
        values = np.empty((xs.size, spec.n_columns))
        for j, col in enumerate(spec.features):
            v = base[col[0]]
            for f in col[1:]:
                v = v * base[f]
            values[:, j] = v
    keep &= np.isfinite(values).all(axis=1)
    kept = np.flatnonzero(keep)
    if kept.size == 0:
        raise EmptyDesignError(f"all {xs.size} rows dropped for spec {spec.name!r}")
    return DesignMatrix(spec, values[kept], kept, xs[kept], n_input=xs.size)


def write_design_csv(dm: DesignMatrix, path) -> None:
    """CSV with header ``x,<column names>``, one row per kept sample."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + dm.spec.column_names)
        for x, row in zip(dm.xs, dm.values):
            w.writerow([format(x, ".17g")] + [format(v, ".17g") for v in row])
