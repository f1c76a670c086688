import csv
import itertools
import math

import numpy as np
import pytest

from trigfit.errors import EmptyDesignError
from trigfit.exprgen import COS, EXP, LOG, SIN, TAN, X, evaluate, xpow
from trigfit.featurize import (
    FeatureSpec, build_design_matrix, canonical_factors, linear_spec, poly_spec, product_spec,
    trig_spec, write_design_csv,
)


def brute_force_count(degree, max_order):
    """Distinct functions among all ordered products of 1..max_order pool entries.

    Each product is reduced to an exponent vector (total power of x, then
    counts of sin, cos, tan, log, exp).
    """
    pool = [("x", k) for k in range(1, degree + 1)] + [(n, 1) for n in ("sin", "cos", "tan", "log", "exp")]
    slots = ["sin", "cos", "tan", "log", "exp"]
    seen = set()
    for order in range(1, max_order + 1):
        for combo in itertools.product(pool, repeat=order):
            vec = [0] * 6
            for name, k in combo:
                if name == "x":
                    vec[0] += k
                else:
                    vec[1 + slots.index(name)] += 1
            seen.add(tuple(vec))
    return len(seen)


def test_trig_spec_rows():
    spec = trig_spec()
    assert spec.n_columns == 3 and spec.include_bias
    dm = build_design_matrix(spec, [0.0, math.pi / 2])
    np.testing.assert_allclose(dm.values, [[0, 1, 0], [1, 0, 0]], atol=1e-15)
    assert dm.kept_row_indices.tolist() == [0, 1]


def test_poly_spec():
    assert poly_spec(2).column_names == ["x", "x^2"]
    assert poly_spec(1).column_names == ["x"]
    dm = build_design_matrix(poly_spec(3), [2.0])
    assert dm.values.tolist() == [[2.0, 4.0, 8.0]]
    with pytest.raises(ValueError):
        poly_spec(0)


def test_linear_spec_is_degree_one():
    assert linear_spec().features == poly_spec(1).features


def test_product_spec_pool_size():
    spec = product_spec(2, 1)
    assert spec.n_columns == 7
    assert set(spec.column_names) == {"x", "x^2", "sin(x)", "cos(x)", "tan(x)", "log(x)", "exp(x)"}


def test_product_spec_degree1_order2():
    assert product_spec(1, 2).n_columns == brute_force_count(1, 2) == 27
    assert "x^2" in product_spec(1, 2).column_names


@pytest.mark.parametrize("degree,max_order", [(d, m) for d in range(1, 4) for m in range(1, 5)])
def test_product_spec_count_matches_brute_force(degree, max_order):
    assert product_spec(degree, max_order).n_columns == brute_force_count(degree, max_order)


def test_product_spec_contains_example_term():
    key = canonical_factors((xpow(4), EXP, TAN))
    assert key in product_spec(1, 6).features
    assert key not in product_spec(1, 5).features


def test_product_spec_rejects_zero():
    with pytest.raises(ValueError):
        product_spec(0, 2)
    with pytest.raises(ValueError):
        product_spec(2, 0)


def test_product_spec_order_stable():
    a, b = product_spec(2, 3), product_spec(2, 3)
    assert a.column_names == b.column_names
    lengths = [len(f) for f in a.features]
    assert lengths == sorted(lengths)


def test_spec_rejects_duplicate_columns():
    with pytest.raises(ValueError):
        FeatureSpec("dup", ((SIN, COS), (COS, SIN)))
    with pytest.raises(ValueError):
        FeatureSpec("dup", ((X, X), (xpow(2),)))


def test_design_drops_log_rows():
    dm = build_design_matrix(product_spec(2, 1), [-1.0, 1.0])
    assert dm.kept_row_indices.tolist() == [1]
    assert dm.dropped_rows == 1
    assert dm.xs.tolist() == [1.0]


def test_design_all_valid_rows_kept():
    xs = np.linspace(-3, 3, 50)
    dm = build_design_matrix(trig_spec(), xs)
    assert dm.rows == 50
    assert dm.kept_row_indices.tolist() == list(range(50))


def test_design_drops_tan_pole_rows():
    xs = np.array([0.0, math.pi / 2, 1.0])
    dm = build_design_matrix(FeatureSpec("t", ((TAN,),)), xs)
    assert dm.kept_row_indices.tolist() == [0, 2]


def test_design_empty():
    with pytest.raises(EmptyDesignError):
        build_design_matrix(FeatureSpec("l", ((LOG,),)), [-2.0, -1.0])


def test_design_overflow_rows_dropped():
    spec = FeatureSpec("e", ((EXP, EXP, EXP),))
    dm = build_design_matrix(spec, [1.0, 300.0])
    assert dm.kept_row_indices.tolist() == [0]


def test_design_invariants_on_wide_range(rng):
    xs = rng.uniform(-10, 10, 400)
    dm = build_design_matrix(product_spec(2, 3), xs)
    assert np.isfinite(dm.values).all()
    assert np.all(np.diff(dm.kept_row_indices) > 0)
    assert dm.rows == dm.kept_row_indices.size
    np.testing.assert_array_equal(dm.xs, xs[dm.kept_row_indices])


def test_columns_match_single_term_expressions(rng):
    spec = product_spec(2, 3)
    xs = rng.uniform(0.05, 3.0, 200)
    dm = build_design_matrix(spec, xs)
    for j, expr in enumerate(spec.as_expressions()):
        want = evaluate(expr, dm.xs)
        np.testing.assert_allclose(dm.values[:, j], want, rtol=1e-12, atol=0)


def test_design_csv(tmp_path):
    dm = build_design_matrix(trig_spec(), [0.0, 0.1])
    path = tmp_path / "dm.csv"
    write_design_csv(dm, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "sin(x)", "cos(x)", "sin(x)*cos(x)"]
    assert float(rows[2][1]) == math.sin(0.1)
    assert len(rows) == 3
