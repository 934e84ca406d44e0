"""Galerkin matrices of the operators on tensor Hermite bases.

Basis functions are ``h_alpha(x) = prod_i He_{alpha_i}(x_i / sqrt(lambda_i)) / sqrt(alpha_i!)``,
orthonormal under the centered Gaussian with variances ``lambda``. For the
unperturbed operators the span of total degree ``<= D`` is invariant, so the
assembled matrices are exact.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial.hermite_e import hermegauss

from . import functions as fns
from . import galerkin_ops as ops
from .errors import InvalidArgumentError, NumericalFailure, PreconditionError, ResourceLimitError
from .gauss import DEFAULT_GRID_BUDGET, reweight

__all__ = [
    "HermiteBasis",
    "OperatorMatrix",
    "MAX_DENSE",
    "assemble",
    "gram_matrix",
    "check_dissipativity",
    "resolvent_solve",
    "semigroup_apply",
    "weighted_norm",
]

MAX_DENSE = 5000
# basis functions processed together during assembly
_CHUNK = 64
_OPS = ("N0", "N", "S", "A", "L")


def _total_degree_indices(dim, degree):
    out = [a for a in itertools.product(range(degree + 1), repeat=dim) if sum(a) <= degree]
    out.sort(key=lambda a: (sum(a), tuple(-v for v in a)))
    return np.array(out, dtype=int).reshape(-1, dim)


@dataclass(frozen=True)
class HermiteBasis:
    """Total-degree Hermite basis on ``R^dim``.

    Index 0 is always the constant function.
    """

    variances: np.ndarray
    max_total_degree: int
    index_set: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.variances, dtype=float).reshape(-1)
        if v.size == 0 or np.any(v <= 0.0):
            raise InvalidArgumentError("basis variances must be positive")
        if self.max_total_degree < 0:
            raise InvalidArgumentError("max_total_degree must be >= 0")
        v.setflags(write=False)
        idx = _total_degree_indices(v.size, int(self.max_total_degree))
        idx.setflags(write=False)
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "index_set", idx)

    @classmethod
    def for_model(cls, m: ops.GalerkinModel, degree, phase=True):
        var = np.concatenate([m.q1, m.q2]) if phase else m.q1
        return cls(var, degree)

    @property
    def dim(self):
        return self.variances.size

    @property
    def size(self):
        return self.index_set.shape[0]

    @property
    def scaling(self):
        return np.sqrt(self.variances)

    def function(self, j) -> fns.SmoothFunction:
        return fns.hermite(tuple(int(a) for a in self.index_set[j]), self.variances)

    def constant_vector(self):
        e = np.zeros(self.size)
        e[0] = 1.0
        return e

    def axis_tables(self, axis, x):
        """Values, first and second derivatives of ``h_0..h_D`` on axis ``axis`` at points ``x``."""
        D = self.max_total_degree
        s = math.sqrt(self.variances[axis])
        z = np.asarray(x, dtype=float) / s
        he = np.empty((D + 1,) + z.shape)
        he[0] = 1.0
        if D >= 1:
            he[1] = z
        for k in range(1, D):
            he[k + 1] = z * he[k] - k * he[k - 1]
        k = np.arange(D + 1)
        norm = np.sqrt([math.factorial(int(i)) for i in k]).reshape((-1,) + (1,) * z.ndim)
        val = he / norm
        d1 = np.zeros_like(val)
        d2 = np.zeros_like(val)
        # d/dx h_k = sqrt(k) h_{k-1} / s
        d1[1:] = np.sqrt(k[1:]).reshape((-1,) + (1,) * z.ndim) * val[:-1] / s
        d2[2:] = np.sqrt(k[2:] * (k[2:] - 1)).reshape((-1,) + (1,) * z.ndim) * val[:-2] / s**2
        return val, d1, d2

    def evaluate(self, points, idx=None, derivatives=True):
        """Values, gradients and Hessians of basis functions ``idx`` at ``points``.

        Returns arrays of shape ``(N, k)``, ``(N, k, d)`` and ``(N, k, d, d)``;
        the last two are None when ``derivatives`` is false.
        """
        points = np.asarray(points, dtype=float)
        idx = np.arange(self.size) if idx is None else np.asarray(idx)
        alpha = self.index_set[idx]
        d = self.dim
        V, D1, D2 = [], [], []
        for a in range(d):
            val, d1, d2 = self.axis_tables(a, points[:, a])
            V.append(val[alpha[:, a]].T)
            D1.append(d1[alpha[:, a]].T)
            D2.append(d2[alpha[:, a]].T)
        value = np.prod(V, axis=0)
        if not derivatives:
            return value, None, None
        grad = np.empty(value.shape + (d,))
        hess = np.empty(value.shape + (d, d))
        for a in range(d):
            others = [V[i] for i in range(d) if i != a]
            rest = np.prod(others, axis=0) if others else np.ones_like(value)
            grad[..., a] = rest * D1[a]
            hess[..., a, a] = rest * D2[a]
            for b in range(a + 1, d):
                others = [V[i] for i in range(d) if i not in (a, b)]
                rest2 = np.prod(others, axis=0) if others else np.ones_like(value)
                hess[..., a, b] = hess[..., b, a] = rest2 * D1[a] * D1[b]
        return value, grad, hess


@dataclass(frozen=True)
class OperatorMatrix:
    """``entries[i, j] = <op(h_j), h_i>`` under the (possibly reweighted) Gaussian.

    ``gram`` is the weighted Gram matrix of the basis; it is the identity when
    no potential is present.
    """

    basis: HermiteBasis
    entries: np.ndarray
    operator_tag: str
    gram: np.ndarray
    assembly_quadrature: dict
    n: int

    @property
    def weighted(self):
        return bool(self.assembly_quadrature.get("weighted", False))

    def save_npy(self, path):
        np.save(path, self.entries)

    def save_csv(self, path):
        np.savetxt(path, self.entries, delimiter=",", fmt="%.17g")


def _tensor_rule(variances, points, budget):
    total = math.prod(points)
    if total > budget:
        raise ResourceLimitError(f"assembly grid of {total} nodes exceeds budget {budget}")
    axes_z, axes_w = [], []
    for p, var in zip(points, variances):
        z, w = hermegauss(p)
        axes_z.append(z * math.sqrt(var))
        axes_w.append(w / w.sum())
    nodes = np.stack([g.reshape(-1) for g in np.meshgrid(*axes_z, indexing="ij")], axis=-1)
    w = axes_w[0]
    for ww in axes_w[1:]:
        w = np.multiply.outer(w, ww)
    return nodes, w.reshape(-1)


def _apply_op(op, m, nodes, grad, hess, dphi):
    n = m.n
    x = nodes[:, None, :n]
    d = None if dphi is None else dphi[:, None, :]
    if op in ("N0", "N"):
        return ops.n_kernel(m.c, m.q1_inv, x, grad, hess, d if op == "N" else None)
    y = nodes[:, None, n:]
    s = ops.s_kernel(m, y, grad[..., n:], hess[..., n:, n:]) if op in ("S", "L") else 0.0
    a = ops.a_kernel(m, x, y, grad[..., :n], grad[..., n:], d) if op in ("A", "L") else 0.0
    return s - a if op == "L" else (s if op == "S" else a)


def _assemble_on(op, m, basis, nodes, weights, dphi):
    K = basis.size
    value, _, _ = basis.evaluate(nodes, np.arange(K), derivatives=False)
    wv = value * weights[:, None]
    out = np.empty((K, K))
    for start in range(0, K, _CHUNK):
        idx = np.arange(start, min(K, start + _CHUNK))
        _, grad, hess = basis.evaluate(nodes, idx)
        out[:, idx] = wv.T @ _apply_op(op, m, nodes, grad, hess, dphi)
    gram = wv.T @ value
    return out, gram


def assemble(op: str, m: ops.GalerkinModel, p, basis: HermiteBasis, budget=DEFAULT_GRID_BUDGET,
             error_estimate=True, x_points=None) -> OperatorMatrix:
    """Galerkin matrix of ``op`` in ``{"N0", "N", "S", "A", "L"}``.

    Without a potential the tensor rule has ``D + 1`` nodes per axis, which
    integrates every entry exactly. With a potential the position axes get
    ``x_points`` nodes (default ``max(2D + 2, 32)``; the weight ``exp(-Phi)``
    is not polynomial) and, if ``error_estimate``, the matrix is re-assembled
    with one node fewer on those axes to report a two-level error.
    """
    if op not in _OPS:
        raise InvalidArgumentError(f"operator must be one of {_OPS}, got {op!r}")
    n = m.n
    want = n if op in ("N0", "N") else 2 * n
    if basis.dim != want:
        raise InvalidArgumentError(f"operator {op} needs a basis of dimension {want}, got {basis.dim}")
    ref = m.q1 if want == n else np.concatenate([m.q1, m.q2])
    if not np.allclose(basis.variances, ref, rtol=1e-14, atol=0.0):
        raise InvalidArgumentError("basis variances do not match the model covariances")
    if basis.size > MAX_DENSE:
        raise ResourceLimitError(f"basis of {basis.size} functions exceeds the dense limit {MAX_DENSE}")
    if op == "N0":
        p = None
    weighted = p is not None and not p.is_zero
    if weighted and p.lower_bound is None:
        raise PreconditionError("potential must carry a lower bound to define the reweighted measure")
    D = basis.max_total_degree

    def build(px):
        pts = [px] * n + [D + 1] * (want - n)
        nodes, w = _tensor_rule(basis.variances, pts, budget)
        dphi = None
        if weighted:
            xs = nodes[:, :n]
            w = reweight(w, p.value(xs))
            dphi = p.gradient(xs)
        mat, gram = _assemble_on(op, m, basis, nodes, w, dphi)
        return mat, gram, pts, w.size

    if not weighted:
        mat, gram, pts, size = build(D + 1)
        record = {"points_per_axis": pts, "nodes": size, "exact": True, "weighted": False, "two_level_error": 0.0}
    else:
        px = max(2 * D + 2, 32) if x_points is None else int(x_points)
        mat, gram, pts, size = build(px)
        err = None
        if error_estimate:
            mat2, gram2, _, _ = build(px - 1)
            err = float(max(np.abs(mat - mat2).max(), np.abs(gram - gram2).max()))
        record = {"points_per_axis": pts, "nodes": size, "exact": False, "weighted": True, "two_level_error": err}
    for a in (mat, gram):
        if not np.all(np.isfinite(a)):
            raise NumericalFailure("assembled matrix has non-finite entries")
        a.setflags(write=False)
    return OperatorMatrix(basis, mat, op, gram, record, n)


def gram_matrix(basis: HermiteBasis, points_per_axis=None):
    """Unweighted Gram matrix on an exact tensor rule (identity for an orthonormal basis)."""
    p = basis.max_total_degree + 1 if points_per_axis is None else points_per_axis
    nodes, w = _tensor_rule(basis.variances, [p] * basis.dim, DEFAULT_GRID_BUDGET)
    value, _, _ = basis.evaluate(nodes, derivatives=False)
    return (value * w[:, None]).T @ value


def weighted_norm(M: OperatorMatrix, coef):
    coef = np.asarray(coef, dtype=float)
    return float(math.sqrt(max(coef @ M.gram @ coef, 0.0)))


def check_dissipativity(M, tol=1e-9, operator_tag=None, n=None, degree=None) -> dict:
    """Largest eigenvalue of the symmetric part, generalized by the Gram matrix when weighted.

    ``M`` may be an :class:`OperatorMatrix` or a plain square array.
    """
    if isinstance(M, OperatorMatrix):
        a = np.asarray(M.entries)
        gram = None if not M.weighted else np.asarray(M.gram)
        operator_tag = operator_tag or M.operator_tag
        n = M.n if n is None else n
        degree = M.basis.max_total_degree if degree is None else degree
    else:
        a = np.asarray(M, dtype=float)
        gram = None
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("dissipativity check needs a square matrix")
    sym = 0.5 * (a + a.T)
    if gram is None:
        top = float(np.linalg.eigvalsh(sym)[-1]) if a.size else 0.0
    else:
        top = float(scipy.linalg.eigh(sym, 0.5 * (gram + gram.T), eigvals_only=True)[-1])
    return {
        "operator_tag": operator_tag,
        "n": n,
        "degree": degree,
        "max_sym_eig": top,
        "tolerance": tol,
        "pass": bool(top <= tol),
    }


def _system(M):
    if isinstance(M, OperatorMatrix):
        a = np.asarray(M.entries)
        g = np.asarray(M.gram) if M.weighted else np.eye(a.shape[0])
        return a, g
    a = np.asarray(M, dtype=float)
    return a, np.eye(a.shape[0])


def resolvent_solve(M, alpha: float, g):
    """Coefficients ``f`` of ``(alpha - op)^-1 g`` in the Galerkin space.

    Solves ``(alpha G - M) f = G g``, which is ``(alpha I - M) f = g`` for the
    orthonormal (unweighted) case.
    """
    if alpha <= 0.0:
        raise InvalidArgumentError("alpha must be positive")
    a, gram = _system(M)
    g = np.asarray(g, dtype=float)
    try:
        f = scipy.linalg.solve(alpha * gram - a, gram @ g)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"resolvent system is singular at alpha={alpha}: {exc}") from None
    if not np.all(np.isfinite(f)):
        raise NumericalFailure(f"resolvent system is singular at alpha={alpha}")
    return f


def semigroup_apply(M, t: float, f0):
    """``exp(t G^-1 M) f0`` by scaling and squaring."""
    if t < 0.0:
        raise InvalidArgumentError("t must be non-negative")
    f0 = np.asarray(f0, dtype=float)
    if t == 0.0:
        return f0.copy()
    a, gram = _system(M)
    gen = a if isinstance(M, np.ndarray) or not getattr(M, "weighted", False) else scipy.linalg.solve(gram, a)
    return scipy.linalg.expm(t * gen) @ f0


def report_json(report: dict) -> str:
    keys = ("operator_tag", "n", "degree", "max_sym_eig", "pass")
    return json.dumps({k: report[k] for k in keys}, sort_keys=False)
