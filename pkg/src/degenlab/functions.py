"""Finitely based test functions with analytic derivatives.

A :class:`SmoothFunction` bundles vectorized evaluators for the value,
gradient, Hessian and third derivative of a function of ``dim`` coordinates.
Inputs carry the coordinates on the last axis; any leading batch shape is
preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import hermite_e

from .errors import InvalidArgumentError

__all__ = [
    "SmoothFunction",
    "constant",
    "linear",
    "polynomial",
    "hermite",
    "trig",
    "exp_quadratic",
    "lift",
    "random_polynomial",
    "random_trig",
    "from_config",
]


@dataclass(frozen=True)
class SmoothFunction:
    dim: int
    value: Callable
    gradient: Callable
    hessian: Callable
    third: Optional[Callable] = None
    family: str = "custom"
    label: str = field(default="custom", compare=False)

    def __call__(self, x):
        return self.value(x)

    def _check(self, other):
        if other.dim != self.dim:
            raise InvalidArgumentError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if not isinstance(other, SmoothFunction):
            return self + constant(self.dim, float(other))
        self._check(other)
        third = None
        if self.third is not None and other.third is not None:
            third = lambda x: self.third(x) + other.third(x)  # noqa: E731
        return SmoothFunction(
            self.dim,
            lambda x: self.value(x) + other.value(x),
            lambda x: self.gradient(x) + other.gradient(x),
            lambda x: self.hessian(x) + other.hessian(x),
            third,
            "sum",
            f"({self.label}+{other.label})",
        )

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if not isinstance(other, SmoothFunction):
            c = float(other)
            third = None if self.third is None else (lambda x: c * self.third(x))
            return SmoothFunction(
                self.dim,
                lambda x: c * self.value(x),
                lambda x: c * self.gradient(x),
                lambda x: c * self.hessian(x),
                third,
                self.family,
                f"{c!r}*{self.label}",
            )
        self._check(other)
        return _product(self, other)

    __rmul__ = __mul__


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _product(f, g):
    def value(x):
        return f.value(x) * g.value(x)

    def gradient(x):
        return f.gradient(x) * g.value(x)[..., None] + f.value(x)[..., None] * g.gradient(x)

    def hessian(x):
        fv, gv = f.value(x)[..., None, None], g.value(x)[..., None, None]
        fg, gg = f.gradient(x), g.gradient(x)
        return f.hessian(x) * gv + fv * g.hessian(x) + _outer(fg, gg) + _outer(gg, fg)

    third = None
    if f.third is not None and g.third is not None:

        def third(x):
            fv, gv = f.value(x), g.value(x)
            fg, gg = f.gradient(x), g.gradient(x)
            fh, gh = f.hessian(x), g.hessian(x)
            out = f.third(x) * gv[..., None, None, None] + fv[..., None, None, None] * g.third(x)
            # all placements of one first-order factor against one second-order factor
            out = out + fh[..., :, :, None] * gg[..., None, None, :]
            out = out + fh[..., :, None, :] * gg[..., None, :, None]
            out = out + fh[..., None, :, :] * gg[..., :, None, None]
            out = out + gh[..., :, :, None] * fg[..., None, None, :]
            out = out + gh[..., :, None, :] * fg[..., None, :, None]
            out = out + gh[..., None, :, :] * fg[..., :, None, None]
            return out

    return SmoothFunction(f.dim, value, gradient, hessian, third, "product", f"({f.label}*{g.label})")


# --------------------------------------------------------------------------
# polynomials in monomial form
# --------------------------------------------------------------------------


class _Monomials:
    """Sparse polynomial ``sum_t c_t prod_a x_a^{e_ta}``."""

    def __init__(self, exps, coefs, dim):
        exps = np.asarray(exps, dtype=int).reshape(-1, dim)
        coefs = np.asarray(coefs, dtype=float).reshape(-1)
        keep = coefs != 0.0
        self.exps, self.coefs, self.dim = exps[keep], coefs[keep], dim

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.coefs.size == 0:
            return np.zeros(x.shape[:-1])
        pw = np.prod(x[..., None, :] ** self.exps, axis=-1)
        return pw @ self.coefs

    def diff(self, axis):
        e = self.exps[:, axis]
        exps = self.exps.copy()
        exps[:, axis] = np.maximum(e - 1, 0)
        return _Monomials(exps, self.coefs * e, self.dim)

    @property
    def degree(self):
        return int(self.exps.sum(axis=1).max()) if self.coefs.size else 0


def polynomial(dim, terms, family="polynomial", label=None):
    """Polynomial from ``{multi_index: coefficient}``.

    >>> p = polynomial(2, {(1, 0): 1.0, (0, 2): 3.0})
    >>> float(p.value(np.array([2.0, 1.0])))
    5.0
    """
    terms = dict(terms)
    for k in terms:
        if len(k) != dim:
            raise InvalidArgumentError(f"multi-index {k} has wrong length for dimension {dim}")
    exps = np.array(list(terms.keys()), dtype=int).reshape(-1, dim)
    coefs = np.array(list(terms.values()), dtype=float)
    base = _Monomials(exps, coefs, dim)
    d1 = [base.diff(a) for a in range(dim)]
    d2 = [[d1[a].diff(b) for b in range(dim)] for a in range(dim)]
    d3 = [[[d2[a][b].diff(c) for c in range(dim)] for b in range(dim)] for a in range(dim)]

    def gradient(x):
        return np.stack([p(x) for p in d1], axis=-1)

    def hessian(x):
        return np.stack([np.stack([p(x) for p in row], axis=-1) for row in d2], axis=-2)

    def third(x):
        return np.stack(
            [np.stack([np.stack([p(x) for p in r2], axis=-1) for r2 in r1], axis=-2) for r1 in d3],
            axis=-3,
        )

    if label is None:
        label = "poly" + repr(sorted((tuple(int(i) for i in k), float(v)) for k, v in terms.items()))
    fn = SmoothFunction(dim, base, gradient, hessian, third, family, label)
    return fn


def constant(dim, c=1.0):
    return polynomial(dim, {(0,) * dim: float(c)}, label=f"const({float(c)!r})")


def linear(a):
    """``x -> <a, x>``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    dim = a.size
    terms = {}
    for i, ai in enumerate(a):
        e = [0] * dim
        e[i] = 1
        terms[tuple(e)] = float(ai)
    return polynomial(dim, terms, label=f"linear({a.tolist()!r})")


def _poly_mul(p, q):
    out = {}
    for ep, cp in p.items():
        for eq, cq in q.items():
            e = tuple(i + j for i, j in zip(ep, eq))
            out[e] = out.get(e, 0.0) + cp * cq
    return out


def hermite(alpha, variances):
    """Orthonormal Hermite polynomial ``prod_i He_{a_i}(x_i / sqrt(v_i)) / sqrt(a_i!)``.

    Orthonormal in ``L^2`` of the centered Gaussian with the given variances.
    """
    alpha = tuple(int(a) for a in alpha)
    variances = np.asarray(variances, dtype=float).reshape(-1)
    dim = len(alpha)
    if variances.size != dim:
        raise InvalidArgumentError("alpha and variances differ in length")
    terms = {(0,) * dim: 1.0}
    for axis, (k, v) in enumerate(zip(alpha, variances)):
        c = hermite_e.herme2poly([0.0] * k + [1.0])
        one = {}
        for power, coef in enumerate(c):
            if coef != 0.0:
                e = [0] * dim
                e[axis] = power
                one[tuple(e)] = coef / v ** (power / 2) / math.sqrt(math.factorial(k))
        terms = _poly_mul(terms, one)
    return polynomial(dim, terms, family="hermite", label=f"hermite({alpha!r},{variances.tolist()!r})")


def trig(freqs, amps, phases=None):
    """Bounded trigonometric sum ``sum_j a_j cos(<k_j, x> + p_j)``."""
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    amps = np.asarray(amps, dtype=float).reshape(-1)
    phases = np.zeros_like(amps) if phases is None else np.asarray(phases, dtype=float).reshape(-1)
    if not (freqs.shape[0] == amps.size == phases.size):
        raise InvalidArgumentError("freqs, amps and phases disagree in length")
    dim = freqs.shape[1]

    def arg(x):
        return np.asarray(x, dtype=float) @ freqs.T + phases

    def value(x):
        return np.cos(arg(x)) @ amps

    def gradient(x):
        return -(np.sin(arg(x)) * amps) @ freqs

    def hessian(x):
        c = np.cos(arg(x)) * amps
        return -np.einsum("...j,ja,jb->...ab", c, freqs, freqs)

    def third(x):
        s = np.sin(arg(x)) * amps
        return np.einsum("...j,ja,jb,jc->...abc", s, freqs, freqs, freqs)

    label = f"trig({freqs.tolist()!r},{amps.tolist()!r},{phases.tolist()!r})"
    return SmoothFunction(dim, value, gradient, hessian, third, "trig", label)


def exp_quadratic(mat):
    """``x -> exp(<M x, x>)`` for symmetric ``M``."""
    m = np.asarray(mat, dtype=float)
    m = 0.5 * (m + m.T)
    dim = m.shape[0]

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.exp(np.einsum("...a,ab,...b->...", x, m, x))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * (x @ m) * value(x)[..., None]

    def hessian(x):
        x = np.asarray(x, dtype=float)
        mx = x @ m
        return (2.0 * m + 4.0 * _outer(mx, mx)) * value(x)[..., None, None]

    def third(x):
        x = np.asarray(x, dtype=float)
        mx = 2.0 * (x @ m)
        m2 = 2.0 * m
        out = mx[..., :, None, None] * mx[..., None, :, None] * mx[..., None, None, :]
        out = out + m2[:, :, None] * mx[..., None, None, :]
        out = out + m2[:, None, :] * mx[..., None, :, None]
        out = out + m2[None, :, :] * mx[..., :, None, None]
        return out * value(x)[..., None, None, None]

    return SmoothFunction(dim, value, gradient, hessian, third, "exp_quadratic", f"expq({m.tolist()!r})")


def lift(f, total_dim, axes):
    """Regard ``f`` as a function of ``total_dim`` coordinates, reading only ``axes``."""
    axes = np.asarray(axes, dtype=int).reshape(-1)
    if axes.size != f.dim:
        raise InvalidArgumentError(f"lift needs {f.dim} axes, got {axes.size}")

    def value(z):
        return f.value(np.asarray(z)[..., axes])

    def gradient(z):
        z = np.asarray(z)
        out = np.zeros(z.shape[:-1] + (total_dim,))
        out[..., axes] = f.gradient(z[..., axes])
        return out

    def hessian(z):
        z = np.asarray(z)
        out = np.zeros(z.shape[:-1] + (total_dim, total_dim))
        out[..., axes[:, None], axes[None, :]] = f.hessian(z[..., axes])
        return out

    third = None
    if f.third is not None:

        def third(z):
            z = np.asarray(z)
            out = np.zeros(z.shape[:-1] + (total_dim,) * 3)
            out[..., axes[:, None, None], axes[None, :, None], axes[None, None, :]] = f.third(z[..., axes])
            return out

    return SmoothFunction(total_dim, value, gradient, hessian, third, f.family, f"lift({f.label},{axes.tolist()})")


def random_polynomial(dim, degree, rng, n_terms=None, scale=1.0):
    """Polynomial with ``n_terms`` random monomials of total degree ``<= degree``."""
    n_terms = n_terms if n_terms is not None else 2 * dim + 2
    terms = {}
    for _ in range(n_terms):
        total = int(rng.integers(0, degree + 1))
        e = np.zeros(dim, dtype=int)
        for _ in range(total):
            e[rng.integers(0, dim)] += 1
        terms[tuple(int(v) for v in e)] = terms.get(tuple(int(v) for v in e), 0.0) + float(
            scale * rng.standard_normal()
        )
    return polynomial(dim, terms)


def random_trig(dim, rng, n_terms=3, max_freq=3):
    freqs = rng.integers(-max_freq, max_freq + 1, size=(n_terms, dim)).astype(float)
    amps = rng.standard_normal(n_terms)
    phases = rng.uniform(0.0, 2.0 * math.pi, n_terms)
    return trig(freqs, amps, phases)


def from_config(cfg, dim):
    """Function from a registry entry such as ``{"family": "polynomial", "terms": [[[1, 0], 2.0]]}``."""
    fam = cfg.get("family")
    if fam == "constant":
        return constant(dim, cfg.get("c", 1.0))
    if fam == "linear":
        return linear(cfg["a"])
    if fam == "polynomial":
        return polynomial(dim, {tuple(e): c for e, c in cfg["terms"]})
    if fam == "hermite":
        return hermite(cfg["alpha"], cfg["variances"])
    if fam == "trig":
        return trig(cfg["freqs"], cfg["amps"], cfg.get("phases"))
    if fam == "random_polynomial":
        rng = np.random.default_rng(cfg.get("seed", 0))
        return random_polynomial(dim, cfg.get("degree", 3), rng)
    if fam == "random_trig":
        rng = np.random.default_rng(cfg.get("seed", 0))
        return random_trig(dim, rng)
    raise InvalidArgumentError(f"function.family: unknown family {fam!r}")
