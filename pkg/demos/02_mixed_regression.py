"""
Products of functional features
===============================

A target mixing powers of x with sin, cos, tan, log and exp products is
linear in the right product features.  The product feature space of degree 2
up to order 6 has 1385 columns, many of them nearly collinear on the sample
grid, so the solver falls back to a tiny ridge penalty when the plain fit is
rank deficient.
"""

import math
import sys
from pathlib import Path

import numpy as np

from trigfit.exprgen import MIXED_EXAMPLE, domain_of, format_expression, gen_mixed_function
from trigfit.featurize import poly_spec, product_spec
from trigfit.linreg import make_dataset, predict, run_comparison

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "mixed"
out_dir.mkdir(parents=True, exist_ok=True)

print("target:", format_expression(MIXED_EXAMPLE))
dom = domain_of(MIXED_EXAMPLE, -math.pi, math.pi)
print(f"guarded domain: [{dom.lower:.4f}, {dom.upper:.4f}], excluded: {dom.exclusions}")

data = make_dataset(MIXED_EXAMPLE, -math.pi, math.pi, 0.01)
print(f"{len(data)} samples, |y| up to {np.abs(data.ys).max():.3e}")

spec = product_spec(2, 6)
print(f"product feature space: {spec.n_columns} columns")

reports = run_comparison(MIXED_EXAMPLE, -math.pi, math.pi, 0.01, [poly_spec(2), spec], seed=0)
print("\ntest absolute-error sums")
for r in reports:
    note = " (ridge fallback)" if r.ridge_fallback else ""
    print(f"  {r.spec_name:12s} {r.test_abs_error:.6e}  cond~{r.condition_estimate:.1e}{note}")
print(f"ratio: {reports[1].test_abs_error / reports[0].test_abs_error:.2e}")

curves = np.column_stack([data.xs, data.ys] + [predict(r.model, data.xs)[0] for r in reports])
np.savetxt(out_dir / "curves.csv", curves, delimiter=",",
           header="x,y_true,poly_2,product_2_6", comments="")
print(f"\ncurves written to {out_dir / 'curves.csv'}")

print("\na few random mixed functions")
for seed in range(3):
    print(f"  seed {seed}: {format_expression(gen_mixed_function(seed))}")
