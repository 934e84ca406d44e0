import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenlab import functions as fns
from degenlab import galerkin_ops as ops
from degenlab import hermite_spectral as hs
from degenlab import potential as pot
from degenlab.errors import InvalidArgumentError, ResourceLimitError


@pytest.fixture(scope="module")
def phase_ops():
    m = ops.dirichlet_identity(1)
    basis = hs.HermiteBasis.for_model(m, 6)
    return m, basis, {op: hs.assemble(op, m, None, basis) for op in ("S", "A", "L")}


@pytest.fixture(scope="module")
def weighted_n():
    m = ops.dirichlet_identity(2)
    p = pot.composite_potential("sqrt1p", 2)
    basis = hs.HermiteBasis.for_model(m, 5, phase=False)
    return hs.assemble("N", m, p, basis)


def test_basis_layout():
    m = ops.dirichlet_identity(2)
    b = hs.HermiteBasis.for_model(m, 4)
    assert b.size == math.comb(4 + 4, 4)
    assert tuple(b.index_set[0]) == (0, 0, 0, 0)
    assert np.all(np.diff(b.index_set.sum(axis=1)) >= 0)
    np.testing.assert_array_equal(b.constant_vector()[:2], [1.0, 0.0])


def test_basis_evaluation_matches_hermite_functions():
    m = ops.dirichlet_identity(2)
    b = hs.HermiteBasis.for_model(m, 3, phase=False)
    x = np.random.default_rng(0).standard_normal((7, 2)) * 0.3
    val, grad, hess = b.evaluate(x)
    for j in (0, 3, b.size - 1):
        h = b.function(j)
        np.testing.assert_allclose(val[:, j], h.value(x), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(grad[:, j], h.gradient(x), rtol=1e-11, atol=1e-10)
        np.testing.assert_allclose(hess[:, j], h.hessian(x), rtol=1e-11, atol=1e-8)


def test_gram_is_identity():
    b = hs.HermiteBasis.for_model(ops.dirichlet_identity(2), 4)
    np.testing.assert_allclose(hs.gram_matrix(b), np.eye(b.size), atol=1e-12)


def test_n0_diagonal_entries():
    m = ops.dirichlet_identity(2)
    b = hs.HermiteBasis.for_model(m, 5, phase=False)
    M = hs.assemble("N0", m, None, b)
    expected = -(b.index_set * (np.diag(m.c) / m.q1)).sum(axis=1)
    np.testing.assert_allclose(M.entries, np.diag(expected), atol=1e-8)
    assert M.assembly_quadrature["exact"]


def test_symmetric_antisymmetric_split(phase_ops):
    _, basis, mats = phase_ops
    S, A, L = (np.asarray(mats[k].entries) for k in ("S", "A", "L"))
    np.testing.assert_allclose(S, S.T, atol=1e-10)
    np.testing.assert_allclose(A, -A.T, atol=1e-10)
    np.testing.assert_allclose(L, S - A, atol=1e-10)
    np.testing.assert_allclose(L @ basis.constant_vector(), 0.0, atol=1e-10)
    rep = hs.check_dissipativity(mats["L"])
    assert rep["pass"] and rep["max_sym_eig"] <= 1e-9


def test_weighted_assembly_dissipative(weighted_n):
    M = weighted_n
    assert M.weighted
    assert M.assembly_quadrature["two_level_error"] < 1e-6 * np.abs(M.entries).max()
    # symmetric up to the quadrature error of the non-polynomial weight
    np.testing.assert_allclose(M.entries, np.asarray(M.entries).T, atol=1e-9 * np.abs(M.entries).max())
    assert hs.check_dissipativity(M)["pass"]


def test_entries_match_pointwise_operator(weighted_n):
    # <N h_j, h_i> by an independent quadrature of apply_N
    M = weighted_n
    m = ops.dirichlet_identity(2)
    p = pot.composite_potential("sqrt1p", 2)
    from degenlab.gauss import quadrature, reweight

    rule = quadrature(m.position_measure(), 40)
    w = reweight(rule.weights, p.value(rule.nodes))
    i, j = 2, 7
    hi, hj = M.basis.function(i), M.basis.function(j)
    val = float(w @ (ops.apply_N(m, p, hj, rule.nodes) * hi.value(rule.nodes)))
    assert val == pytest.approx(M.entries[i, j], rel=1e-7, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
def test_resolvent_contraction_and_residual(phase_ops, seed, alpha):
    _, basis, mats = phase_ops
    g = np.random.default_rng(seed).standard_normal(basis.size)
    f = hs.resolvent_solve(mats["L"], alpha, g)
    L = np.asarray(mats["L"].entries)
    assert np.linalg.norm(alpha * f - L @ f - g) <= 1e-10 * np.linalg.norm(g)
    assert np.linalg.norm(alpha * f) <= np.linalg.norm(g) * (1 + 1e-10)


def test_weighted_resolvent_contraction(weighted_n):
    g = np.random.default_rng(1).standard_normal(weighted_n.basis.size)
    for alpha in (0.5, 1.0, 2.0):
        f = hs.resolvent_solve(weighted_n, alpha, g)
        assert alpha * hs.weighted_norm(weighted_n, f) <= hs.weighted_norm(weighted_n, g) * (1 + 1e-10)


def test_semigroup_of_diagonal_n0():
    m = ops.dirichlet_identity(1)
    b = hs.HermiteBasis.for_model(m, 4, phase=False)
    M = hs.assemble("N0", m, None, b)
    f0 = np.arange(1.0, b.size + 1)
    t = 0.01
    np.testing.assert_allclose(hs.semigroup_apply(M, t, f0), np.exp(t * np.diag(M.entries)) * f0, rtol=1e-12)
    np.testing.assert_array_equal(hs.semigroup_apply(M, 0.0, f0), f0)


def test_semigroup_contraction(phase_ops):
    _, basis, mats = phase_ops
    f0 = np.random.default_rng(2).standard_normal(basis.size)
    norms = [np.linalg.norm(hs.semigroup_apply(mats["L"], t, f0)) for t in (0.0, 0.01, 0.1, 1.0)]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(norms, norms[1:]))


def test_dissipativity_on_plain_arrays():
    assert not hs.check_dissipativity(np.array([[0.0, 0.0], [0.0, 1e-3]]))["pass"]
    assert hs.check_dissipativity(-np.eye(3))["max_sym_eig"] == -1.0


def test_resource_and_argument_errors():
    m = ops.dirichlet_identity(2)
    big = hs.HermiteBasis.for_model(m, 20)
    with pytest.raises(ResourceLimitError):
        hs.assemble("L", m, None, big)
    with pytest.raises(InvalidArgumentError):
        hs.assemble("N0", m, None, hs.HermiteBasis.for_model(m, 2))
    with pytest.raises(InvalidArgumentError):
        hs.assemble("X", m, None, hs.HermiteBasis.for_model(m, 2))
    with pytest.raises(InvalidArgumentError):
        hs.resolvent_solve(-np.eye(2), -1.0, np.ones(2))


def test_exports(tmp_path, phase_ops):
    _, _, mats = phase_ops
    M = mats["A"]
    M.save_npy(tmp_path / "a.npy")
    M.save_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(np.load(tmp_path / "a.npy"), M.entries)
    assert (tmp_path / "a.csv").read_text().count("\n") >= M.basis.size
    assert '"pass": true' in hs.report_json(hs.check_dissipativity(mats["L"]))


def test_basis_function_type():
    b = hs.HermiteBasis(np.array([0.2, 0.1]), 2)
    assert isinstance(b.function(4), fns.SmoothFunction)
