"""Where the mixed term in the Langevin second-order relation comes from.

Run with ``python3 demos/langevin_mixed_term.py``.

For f(x, y) = x y with all coefficients equal to one, S f = -x y and
A f = x^2 - y^2. The L2 norm of L f is then 5, while the sum of the
symmetric second-order quantities is only 3. The missing 2 is twice the
cross term between the position and velocity second derivatives. Once it
is included the relation closes to rounding error.
"""
import numpy as np

from degenlab import functions as fns
from degenlab import galerkin_ops as ops
from degenlab import verify as ver

eye = np.eye(1)
unit = ops.GalerkinModel(1, [1.0], [1.0], eye, eye, eye, eye, 1.0, 1.0, label="unit")
f = fns.polynomial(2, {(1, 1): 1.0})

reps = {r.identity_tag: r for r in ver.verify_langevin(f, 1.0, unit)}
sq = reps["langevin-square"]
print(f"without mixed term: lhs {sq.lhs:.6f}  int (Lf)^2 {sq.rhs:.6f}  pass={sq.passed}")
mixed = reps["langevin-square-mixed"]
print(f"mixed term: {mixed.terms['mixed']:.6f}")
print(f"with mixed term:    residual {mixed.abs_err:.1e}  pass={mixed.passed}")
print()

# for random polynomials on the two-mode model the picture is the same
m = ops.dirichlet_identity(2)
rng = np.random.default_rng(4)
for trial in range(3):
    reps = {r.identity_tag: r for r in ver.verify_langevin(fns.random_polynomial(4, 3, rng), 1.0, m)}
    print(f"trial {trial}: printed form err {reps['langevin-square'].abs_err:9.3e}   "
          f"completed form err {reps['langevin-square-mixed'].abs_err:9.3e}")

# the mixed term vanishes when f depends on positions only
fx = fns.lift(fns.random_polynomial(2, 3, rng), 4, [0, 1])
reps = {r.identity_tag: r for r in ver.verify_langevin(fx, 1.0, m)}
print(f"position-only f: printed form err {reps['langevin-square'].abs_err:.1e}")
