"""Galerkin spectra of the Langevin generator and a matching SDE ensemble.

Run with ``python3 demos/spectral_and_sde.py`` (about half a minute).

The generator restricted to Hermite polynomials of bounded total degree is
a finite matrix. Its symmetric part must be negative semidefinite, the
resolvent must contract and the semigroup must not increase the norm. We
then simulate the two-mode damped wave SDE and compare stationary moments
with the Gaussian invariant law.
"""
import numpy as np

from degenlab import galerkin_ops as ops
from degenlab import hermite_spectral as hs
from degenlab import langevin_sim as sim
from degenlab import potential as pot

m = ops.dirichlet_identity(1)
basis = hs.HermiteBasis.for_model(m, 6)
L = hs.assemble("L", m, None, basis)
print(f"basis size {basis.size}; max eigenvalue of sym(L) = {hs.check_dissipativity(L)['max_sym_eig']:.2e}")

eig = np.linalg.eigvals(np.asarray(L.entries))
top = eig[np.argsort(-eig.real)][:6]
print("least damped eigenvalues:", np.round(top, 3))

g = np.random.default_rng(0).standard_normal(basis.size)
for alpha in (0.5, 1.0, 2.0):
    f = hs.resolvent_solve(L, alpha, g)
    print(f"alpha {alpha}: |alpha f| / |g| = {alpha * np.linalg.norm(f) / np.linalg.norm(g):.4f}")

norms = [np.linalg.norm(hs.semigroup_apply(L, t, g)) for t in (0.0, 0.1, 1.0, 10.0)]
print("semigroup norms:", np.round(norms, 4))
print()

# with a convex potential the weighted assembly uses a Gram matrix
phi = pot.composite_potential("sqrt1p", 2)
N = hs.assemble("N", ops.dirichlet_identity(2), phi, hs.HermiteBasis.for_model(ops.dirichlet_identity(2), 4,
                                                                                 phase=False))
print(f"weighted N: dissipative={hs.check_dissipativity(N)['pass']}, "
      f"two-level quadrature error {N.assembly_quadrature['two_level_error']:.1e}")
print()

cfg = sim.SimConfig(2, 2e-3, 5000, 2000, seed=3)
ens = sim.simulate(cfg)
for k in (1, 2):
    rep = sim.invariant_check(ens, k)
    for row in rep["rows"]:
        print(f"mode {k} {row['quantity']:7s} est {row['estimate']: .5f} target {row['target']:.5f} "
              f"z {row['z']: .2f}")
