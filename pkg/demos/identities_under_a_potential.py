"""Integration by parts and regularity identities under a reweighted Gaussian.

Run with ``python3 demos/identities_under_a_potential.py``.

We take the first two sine modes of the Dirichlet Laplacian, tilt the
Gaussian by a convex potential and check a handful of identities by tensor
Gauss-Hermite quadrature. Each check prints its residual next to the
tolerance it was judged against.
"""
import numpy as np

from degenlab import functions as fns
from degenlab import galerkin_ops as ops
from degenlab import potential as pot
from degenlab import verify as ver

m = ops.dirichlet_identity(2)
phi = pot.composite_potential("sqrt1p", 2)
rng = np.random.default_rng(0)

f = fns.random_polynomial(2, 3, rng)
g = fns.random_trig(2, rng)

print("model:", m.label, "q1 =", m.q1)
print("potential:", phi.label, "lower bound", phi.lower_bound)
print()

# integration by parts along each axis; the potential's gradient enters the right side
for axis in range(2):
    r = ver.verify_ibp(f, g, axis, m.position_measure(), phi, budget=40)
    print(f"ibp axis {axis}: |lhs - rhs| = {r.abs_err:.2e}  (tol {r.tolerance:.0e})  pass={r.passed}")

# the same identity by Monte Carlo: the tolerance is now three standard errors
r = ver.verify_ibp(f, g, 0, m.position_measure(), phi, method="mc", budget=100_000, seed=1)
print(f"ibp by sampling: residual {r.abs_err:.2e} against 3 se = {r.tolerance:.2e}  pass={r.passed}")
print()

# first and second order identities for the resolvent of N, and the regularity bounds
for r in ver.verify_reg_N(f, 1.0, m, phi) + ver.verify_reg_bound(f, 1.0, m, phi):
    extra = f"slack {r.slack:.2e}" if r.kind == "inequality" else f"err {r.abs_err:.2e}"
    print(f"{r.identity_tag:28s} {r.kind:10s} {extra}  pass={r.passed}")
