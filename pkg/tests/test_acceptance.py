"""Acceptance suite: one test per criterion, each logging a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed in the
"acceptance criteria" section of the terminal summary. Running this file
directly with ``python3 tests/test_acceptance.py`` prints the same lines.
"""
import math
import time

import numpy as np
import pytest

from degenlab import functions as fns
from degenlab import galerkin_ops as ops
from degenlab import hermite_spectral as hs
from degenlab import langevin_sim as sim
from degenlab import potential as pot
from degenlab import verify as ver
from degenlab.cli import moreau_checks, moreau_grid
from degenlab.gauss import CovSpectrum, moment2, moment4, project_measure, quadrature, sample


def _log(log, number, ok, title, detail):
    line = f"criterion {number:02d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    log.append(line)
    print(line)


def _composite(name, n, delta=None):
    cfg = {"kind": "composite", "phi": name}
    if delta is not None:
        cfg["delta"] = delta
    return pot.potential_from_config(cfg, n)


def _random_c(m, rng):
    """Non-diagonal ``c = d^1/2 (I + E) d^1/2`` around the diagonal ``d`` of ``m.c``.

    ``E`` is symmetric with spectral norm 1/2, so ``c`` is positive definite
    at the scale of ``m.c``; draws with ``sym(q1^-1 c)`` not positive definite
    are rejected.
    """
    root = np.sqrt(np.diag(m.c))
    while True:
        e = rng.standard_normal((m.n, m.n))
        e = e + e.T
        norm = np.abs(np.linalg.eigvalsh(e)).max()
        e = 0.5 * e / norm if norm > 0 else e
        c = root[:, None] * (np.eye(m.n) + e) * root[None, :]
        s = c / m.q1[:, None]
        if np.linalg.eigvalsh(0.5 * (s + s.T))[0] > 0.0:
            return c


# --------------------------------------------------------------------------
# 1. Gaussian moments
# --------------------------------------------------------------------------


def test_criterion_01_gaussian_moments(acceptance_log):
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst_quad = 0.0
    worst_z = 0.0
    for n in (1, 2, 3):
        g = project_measure(CovSpectrum.dirichlet(n), n)
        rule = quadrature(g, 3)
        pts = sample(g, 10**6, seed=200 + n)
        ls = rng.standard_normal((4, n))
        lin_q = rule.nodes @ ls.T
        lin_s = pts @ ls.T
        m2 = moment2(ls[0], ls[1], g)
        m4 = moment4(*ls, g)
        worst_quad = max(worst_quad, abs(m2 - rule.integrate(lin_q[:, 0] * lin_q[:, 1])))
        worst_quad = max(worst_quad, abs(m4 - rule.integrate(np.prod(lin_q, axis=1))))
        for exact, vals in ((m2, lin_s[:, 0] * lin_s[:, 1]), (m4, np.prod(lin_s, axis=1))):
            se = vals.std(ddof=1) / math.sqrt(vals.size)
            worst_z = max(worst_z, abs(vals.mean() - exact) / se)
    elapsed = time.time() - t0
    ok = worst_quad <= 1e-12 and worst_z <= 3.0 and elapsed < 10.0
    _log(acceptance_log, 1, ok, "Gaussian moments",
         f"max |closed form - quadrature| = {worst_quad:.1e}, max MC |z| = {worst_z:.2f}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 2. Integration by parts
# --------------------------------------------------------------------------


def test_criterion_02_integration_by_parts(acceptance_log):
    t0 = time.time()
    rng = np.random.default_rng(202)
    worst_flat = worst_weighted = 0.0
    cases = 0
    for c in range(50):
        n = 1 + c % 3
        meas = project_measure(CovSpectrum.dirichlet(n), n)
        if c % 2:
            f, g = fns.random_trig(n, rng), fns.random_trig(n, rng)
        else:
            f, g = fns.random_polynomial(n, 4, rng), fns.random_polynomial(n, 3, rng)
        axis = int(rng.integers(0, n))
        if c < 20:
            r = ver.verify_ibp(f, g, axis, meas, None, budget=20)
            worst_flat = max(worst_flat, r.abs_err)
        else:
            p = [pot.quadratic_potential(n), _composite("sqrt1p", n, 2), _composite("soft-well", n)][c % 3]
            r = ver.verify_ibp(f, g, axis, meas, p, budget=40)
            worst_weighted = max(worst_weighted, r.abs_err)
        cases += 1
    elapsed = time.time() - t0
    ok = worst_flat <= 1e-8 and worst_weighted <= 1e-6 and elapsed < 60.0
    _log(acceptance_log, 2, ok, "integration by parts",
         f"{cases} cases, max residual {worst_flat:.1e} (no potential), {worst_weighted:.1e} (with potential), "
         f"{elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 3. Regularity identities of N0
# --------------------------------------------------------------------------


def test_criterion_03_n0_identities(acceptance_log):
    t0 = time.time()
    rng = np.random.default_rng(303)
    worst = {}
    for c in range(200):
        n = 1 + c % 2
        m = ops.dirichlet_identity(n)
        if c % 4 >= 2:
            m = m.with_c(_random_c(m, rng))
        f = fns.random_polynomial(n, int(rng.integers(1, 5)), rng)
        alpha = float(rng.choice([0.5, 1.0, 2.0]))
        for r in ver.verify_reg_N0(f, alpha, m):
            worst[r.identity_tag] = max(worst.get(r.identity_tag, 0.0), r.abs_err)
    elapsed = time.time() - t0
    ok = all(v <= 1e-9 for v in worst.values()) and elapsed < 120.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items()))
    _log(acceptance_log, 3, ok, "N0 identities and coercivity", f"200 cases, max residual: {detail}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 4. Identities with a potential and one-sided bounds
# --------------------------------------------------------------------------


def test_criterion_04_potential_identities_and_bounds(acceptance_log):
    rng = np.random.default_rng(404)
    worst = 0.0
    for c in range(100):
        n = 1 + c % 2
        m = ops.dirichlet_identity(n)
        if c % 4 >= 2:
            m = m.with_c(_random_c(m, rng))
        p = pot.quadratic_potential(n) if c % 2 == 0 else _composite("sqrt1p", n, 2)
        f = fns.random_polynomial(n, int(rng.integers(1, 4)), rng)
        for r in ver.verify_reg_N(f, float(rng.choice([0.5, 1.0, 2.0])), m, p):
            worst = max(worst, r.abs_err)
    violations = 0
    min_slack = math.inf
    for c in range(300):
        n = 1 + c % 2
        m = ops.dirichlet_identity(n)
        if c % 3 == 2:
            m = m.with_c(_random_c(m, rng))
        p = [pot.quadratic_potential(n), _composite("sqrt1p", n, 2), _composite("soft-well", n)][c % 3]
        f = fns.random_polynomial(n, int(rng.integers(1, 4)), rng)
        for r in ver.verify_reg_bound(f, [0.5, 1.0, 2.0][c % 3], m, p):
            min_slack = min(min_slack, r.slack)
            violations += r.slack < -1e-10
    ok = worst <= 1e-6 and violations == 0
    _log(acceptance_log, 4, ok, "identities with potential, one-sided bounds",
         f"100 cases max residual {worst:.1e}; 300 bound cases, {violations} violations, min slack {min_slack:.2e}")
    assert ok


# --------------------------------------------------------------------------
# 5. Hermite assembly
# --------------------------------------------------------------------------


def test_criterion_05_hermite_assembly(acceptance_log):
    t0 = time.time()
    m = ops.dirichlet_identity(2)
    xb = hs.HermiteBasis.for_model(m, 8, phase=False)
    N0 = hs.assemble("N0", m, None, xb)
    expected = -(xb.index_set * (np.diag(m.c) / m.q1)).sum(axis=1)
    n0_err = float(np.abs(N0.entries - np.diag(expected)).max())
    basis = hs.HermiteBasis.for_model(m, 8)
    S = np.asarray(hs.assemble("S", m, None, basis).entries)
    A = np.asarray(hs.assemble("A", m, None, basis).entries)
    LM = hs.assemble("L", m, None, basis)
    L = np.asarray(LM.entries)
    sym_err = float(np.abs(S - S.T).max())
    anti_err = float(np.abs(A + A.T).max())
    split_err = float(np.abs(L - (S - A)).max())
    const_err = float(np.abs(L @ basis.constant_vector()).max())
    top = hs.check_dissipativity(LM)["max_sym_eig"]
    rng = np.random.default_rng(505)
    excess = 0.0
    for alpha in (0.5, 1.0, 2.0):
        for _ in range(100):
            g = rng.standard_normal(basis.size)
            f = hs.resolvent_solve(LM, alpha, g)
            excess = max(excess, np.linalg.norm(alpha * f) / np.linalg.norm(g) - 1.0)
    elapsed = time.time() - t0
    ok = (n0_err <= 1e-8 and max(sym_err, anti_err, split_err, const_err) <= 1e-10 and top <= 1e-9
          and excess <= 1e-10 and elapsed < 300.0)
    _log(acceptance_log, 5, ok, "Hermite assembly",
         f"N0 diagonal {n0_err:.1e}, S sym {sym_err:.1e}, A antisym {anti_err:.1e}, L-(S-A) {split_err:.1e}, "
         f"constant row {const_err:.1e}, max sym eig {top:.1e}, resolvent excess {excess:.1e}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 6. Regularity relations of the Langevin operator
# --------------------------------------------------------------------------


def test_criterion_06_langevin_relations(acceptance_log):
    rng = np.random.default_rng(606)
    printed = ("langevin-first", "langevin-second", "langevin-square",
               "langevin-coercivity-lower", "langevin-coercivity-upper")
    worst = {}
    fails = {}
    for c in range(100):
        n = 1 + c % 2
        m = ops.dirichlet_identity(n)
        f = fns.random_polynomial(2 * n, int(rng.integers(1, 4)), rng)
        for r in ver.verify_langevin(f, float(rng.choice([0.5, 1.0, 2.0])), m):
            worst[r.identity_tag] = max(worst.get(r.identity_tag, 0.0), r.abs_err)
            fails[r.identity_tag] = fails.get(r.identity_tag, 0) + (r.abs_err > 1e-8)
    ok = all(worst[t] <= 1e-8 for t in printed)
    detail = "; ".join(f"{t} max residual {worst[t]:.1e} ({fails[t]}/100 over)" for t in sorted(worst))
    _log(acceptance_log, 6, ok, "Langevin regularity relations as displayed", detail)
    assert ok, (
        "the second-order relation and the relation against int (Lf)^2 omit the mixed term "
        "-2 sum_ij (k12)_ij int A(d_{y_i} f) d_{x_j} f; the completed relations (tags ending in -mixed) hold"
    )


# --------------------------------------------------------------------------
# 7. Ground-state transform
# --------------------------------------------------------------------------


def test_criterion_07_ground_state(acceptance_log):
    rng = np.random.default_rng(707)
    worst = 0.0
    for n in (1, 2):
        m = ops.dirichlet_identity(n)
        gs = ops.ground_state_factor(m)
        phi = fns.random_trig(2 * n, rng, max_freq=2) + fns.random_polynomial(2 * n, 3, rng)
        z = rng.standard_normal((1000, 2 * n)) * 0.5
        x, y = z[:, :n], z[:, n:]
        composed = ops.apply_S(m, phi * gs, x, y) / gs.value(z)
        direct = ops.ground_state_conjugate(m, phi, x, y)
        worst = max(worst, float(np.max(np.abs(composed - direct) / np.maximum(1.0, np.abs(direct)))))
    ok = worst <= 1e-8
    _log(acceptance_log, 7, ok, "ground-state transform", f"1000 points per n, max mismatch {worst:.1e}")
    assert ok


# --------------------------------------------------------------------------
# 8. Moreau-Yoshida approximation
# --------------------------------------------------------------------------


def test_criterion_08_moreau_yoshida(acceptance_log):
    t_grid = [1.0, 0.1, 0.01, 0.001]
    u = moreau_grid(1, 100, 2.0, 0)
    potentials = [pot.quadratic_potential(1), pot.abs_potential(1),
                  _composite("sqrt1p", 1), _composite("soft-well", 1), _composite("quadratic", 1)]
    records = []
    for p in potentials:
        records += moreau_checks(p, t_grid, u)
    q = pot.quadratic_potential(1)
    closed = 0.0
    for t in t_grid:
        for uu in u:
            v, g, x = pot.moreau_yoshida(q, t, uu)
            closed = max(closed, abs(v - float(uu @ uu) / (2 * (1 + t))), float(np.abs(x - uu / (1 + t)).max()))
    failed = [f"{r['potential']} item {r['item']}" for r in records if not r["pass"]]
    ok = not failed and closed <= 1e-9
    _log(acceptance_log, 8, ok, "Moreau-Yoshida approximation",
         f"{len(potentials)} potentials x items 1-4 on 100 points, {len(failed)} failures, "
         f"quadratic closed-form error {closed:.1e}")
    assert ok, failed


# --------------------------------------------------------------------------
# 9. SDE simulator
# --------------------------------------------------------------------------

GENERATOR_FUNCTIONS = [
    fns.polynomial(4, {(0, 0, 2, 0): 1.0}),
    fns.polynomial(4, {(1, 0, 1, 0): 1.0}),
    fns.polynomial(4, {(2, 0, 0, 0): 1.0}),
    fns.trig([[1.0, 0.0, 0.0, 1.0]], [1.0], [0.3]),
    fns.polynomial(4, {(0, 1, 0, 1): 1.0, (0, 0, 1, 1): 0.5}),
]


def test_criterion_09_sde_simulator(acceptance_log):
    t0 = time.time()
    cfg = sim.SimConfig(2, 1e-3, 10_000, 10_000, "semi-implicit", None, seed=7)
    ens = sim.simulate(cfg)
    parts = []
    ok = True
    for k in (1, 2):
        rep = sim.invariant_check(ens, k)
        rows = {r["quantity"]: r for r in rep["rows"]}
        ok = ok and rows["var_u"]["rel_dev"] <= 0.05 and abs(rows["cov_uv"]["z"]) <= 3.0
        parts.append(f"Var(u{k}) {rows['var_u']['estimate']:.5f} vs {rows['var_u']['target']:.5f}, "
                     f"cov z {rows['cov_uv']['z']:.2f}")
    slopes = []
    gcfg = sim.SimConfig(2, 1e-3, 4, 10_000, "semi-implicit", None, seed=11)
    for f in GENERATOR_FUNCTIONS:
        r = sim.generator_consistency(gcfg, f, [0.12, -0.05], [0.08, 0.03])
        slopes.append(r["slope"])
        ok = ok and r["pass"] and 0.7 <= r["slope"] <= 1.3
    elapsed = time.time() - t0
    ok = ok and elapsed < 600.0
    _log(acceptance_log, 9, ok, "SDE simulator",
         "; ".join(parts) + f"; generator slopes {', '.join(f'{s:.2f}' for s in slopes)}; {elapsed:.0f} s")
    assert ok


# --------------------------------------------------------------------------
# 10. Smallness pipeline
# --------------------------------------------------------------------------


def test_criterion_10_smallness(acceptance_log):
    m = ops.dirichlet_identity(3)
    p = pot.scale_for_smallness(_composite("sqrt1p", 3), 2.0)
    rep = pot.smallness_check(p, float(m.q2.max()))
    ok = p.grad_sup_norm == math.pi / 4 and rep["pass"] and rep["bound"] == pytest.approx(math.pi**2 / 4, rel=1e-15)
    _log(acceptance_log, 10, ok, "smallness pipeline",
         f"grad sup-norm {p.grad_sup_norm!r} (pi/4 = {math.pi / 4!r}), "
         f"squared {rep['grad_sup_norm_sq']:.6f} < bound {rep['bound']:.6f}")
    assert ok


if __name__ == "__main__":
    import sys

    lines = []
    status = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn(lines)
            except AssertionError:
                status = 1
    sys.exit(status)
