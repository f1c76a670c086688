"""
Trigonometric features in a linear model
========================================

A sum of sin, cos and sin*cos terms is linear in those three functions of x,
so ordinary least squares recovers it once the features are supplied.
Plain linear and quadratic fits on x cannot.
"""

import math
import sys
from pathlib import Path

import numpy as np

from trigfit.exprgen import TRIG_EXAMPLE, format_expression, gen_trig_function
from trigfit.featurize import linear_spec, poly_spec, trig_spec
from trigfit.linreg import make_dataset, predict, run_comparison

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "trig"
out_dir.mkdir(parents=True, exist_ok=True)

# The target function and its samples on [-pi, pi] at step 0.01.
print("target:", format_expression(TRIG_EXAMPLE))
data = make_dataset(TRIG_EXAMPLE, -math.pi, math.pi, 0.01)
print(f"{len(data)} samples, y in [{data.ys.min():.2f}, {data.ys.max():.2f}]")

# Fit three hypotheses on one shared 80/20 split.
reports = run_comparison(TRIG_EXAMPLE, -math.pi, math.pi, 0.01,
                         [linear_spec(), poly_spec(2), trig_spec()], seed=0)
print("\ntest absolute-error sums")
for r in reports:
    print(f"  {r.spec_name:8s} {r.test_abs_error:.6e}")

# The trig model's weights are the collapsed coefficients of the target.
trig = reports[-1].model
print("\ntrig weights:", {k: round(v, 9) + 0.0 for k, v in trig.coefficients().items()})
print("intercept:", round(trig.intercept, 12) + 0.0)

# Curves for plotting: desired output and each model's prediction.
curves = np.column_stack([data.xs, data.ys] + [predict(r.model, data.xs)[0] for r in reports])
header = "x,y_true," + ",".join(r.spec_name for r in reports)
np.savetxt(out_dir / "curves.csv", curves, delimiter=",", header=header, comments="")
print(f"\ncurves written to {out_dir / 'curves.csv'}")

# Random functions of the same family are recovered just as well.
print("\nrandom trig functions")
for seed in range(5):
    expr = gen_trig_function(seed, 4)
    (r,) = run_comparison(expr, -math.pi, math.pi, 0.01, [trig_spec()], seed=seed)
    print(f"  seed {seed}: test error {r.test_abs_error:.2e}  {format_expression(expr)}")
