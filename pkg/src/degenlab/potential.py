"""Potentials on the truncated position coordinates.

A :class:`Potential` is an immutable bundle of vectorized evaluators plus the
metadata (lower bound, convexity, gradient bounds) that the operators and
the reweighted Gaussian measures need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgumentError, NumericalFailure, PreconditionError, UnsupportedError

__all__ = [
    "Potential",
    "Phi1D",
    "PHI_LIBRARY",
    "zero_potential",
    "quadratic_potential",
    "abs_potential",
    "composite_potential",
    "scale_for_smallness",
    "smallness_check",
    "moreau_yoshida",
    "potential_from_config",
]


@dataclass(frozen=True)
class Potential:
    """Potential ``Phi`` on ``R^dim`` with metadata.

    ``prox(u, t)``, when present, returns the exact proximal point of
    ``t * Phi`` at ``u``; it is required for non-differentiable potentials.
    """

    dim: int
    value: Callable
    gradient: Callable
    hessian: Optional[Callable] = None
    lower_bound: Optional[float] = None
    convex: bool = False
    grad_sup_norm: Optional[float] = None
    grad_lipschitz: Optional[float] = None
    growth: Optional[tuple] = None
    differentiable: bool = True
    prox: Optional[Callable] = None
    label: str = "custom"

    def scaled(self, c):
        """``c * Phi`` for ``c > 0`` with metadata rescaled."""
        c = float(c)
        if c <= 0.0:
            raise InvalidArgumentError("scale factor must be positive")
        hess = None if self.hessian is None else (lambda x: c * self.hessian(x))
        prox = None if self.prox is None else (lambda u, t: self.prox(u, c * t))

        def _mul(v):
            return None if v is None else c * v

        return replace(
            self,
            value=lambda x: c * self.value(x),
            gradient=lambda x: c * self.gradient(x),
            hessian=hess,
            lower_bound=_mul(self.lower_bound),
            grad_sup_norm=_mul(self.grad_sup_norm),
            grad_lipschitz=_mul(self.grad_lipschitz),
            prox=prox,
            label=f"{c!r}*{self.label}",
        )

    @property
    def is_zero(self):
        return self.label == "zero"


def zero_potential(n):
    return Potential(
        n,
        lambda x: np.zeros(np.shape(x)[:-1]),
        lambda x: np.zeros(np.shape(x)),
        lambda x: np.zeros(np.shape(x) + (n,)),
        lower_bound=0.0,
        convex=True,
        grad_sup_norm=0.0,
        grad_lipschitz=0.0,
        prox=lambda u, t: np.array(u, dtype=float),
        label="zero",
    )


def quadratic_potential(n, scale=1.0):
    """``Phi(x) = scale * |x|^2 / 2``; convex with Lipschitz gradient, unbounded gradient."""
    s = float(scale)
    eye = np.eye(n)
    return Potential(
        n,
        lambda x: 0.5 * s * np.sum(np.asarray(x) ** 2, axis=-1),
        lambda x: s * np.asarray(x, dtype=float),
        lambda x: s * np.broadcast_to(eye, np.shape(x) + (n,)).copy(),
        lower_bound=0.0,
        convex=True,
        grad_lipschitz=s,
        label=f"quadratic({s!r})",
    )


def abs_potential(n, weights=None):
    """``Phi(x) = sum_i w_i |x_i|`` with soft-threshold prox."""
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.size != n or np.any(w < 0.0):
        raise InvalidArgumentError("abs_potential weights must be non-negative, one per axis")

    def prox(u, t):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.maximum(np.abs(u) - t * w, 0.0)

    return Potential(
        n,
        lambda x: np.abs(np.asarray(x)) @ w,
        lambda x: np.sign(np.asarray(x, dtype=float)) * w,
        None,
        lower_bound=0.0,
        convex=True,
        grad_sup_norm=float(np.linalg.norm(w)),
        differentiable=False,
        prox=prox,
        label=f"abs({w.tolist()!r})",
    )


# --------------------------------------------------------------------------
# composite potentials Phi(u) = int_0^1 phi(u(s)) ds in the sine basis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Phi1D:
    """Scalar ``phi`` with derivatives and the constants the potential inherits."""

    name: str
    f: Callable
    df: Callable
    d2f: Optional[Callable]
    lower_bound: Optional[float]
    convex: bool
    deriv_sup: Optional[float] = None
    deriv_lipschitz: Optional[float] = None
    growth: Optional[tuple] = None

    def scaled(self, c):
        c = float(c)
        d2 = None if self.d2f is None else (lambda t: c * self.d2f(t))

        def _mul(v):
            return None if v is None else c * v

        return Phi1D(
            f"{c!r}*{self.name}",
            lambda t: c * self.f(t),
            lambda t: c * self.df(t),
            d2,
            _mul(self.lower_bound),
            self.convex,
            _mul(self.deriv_sup),
            _mul(self.deriv_lipschitz),
            self.growth,
        )


def _sqrt1p(t):
    return np.sqrt(1.0 + t * t)


PHI_LIBRARY = {
    "zero": Phi1D("zero", np.zeros_like, np.zeros_like, np.zeros_like, 0.0, True, 0.0, 0.0, (0.0, 2.0, 0.0, 1.0)),
    "abs": Phi1D("abs", np.abs, np.sign, None, 0.0, True, 1.0, None, (1.0, 2.0, 1.0, 1.0)),
    "quadratic": Phi1D(
        "quadratic", lambda t: t * t, lambda t: 2.0 * t, lambda t: np.full_like(t, 2.0), 0.0, True, None, 2.0,
        (1.0, 2.0, 2.0, 1.0),
    ),
    "sqrt1p": Phi1D(
        "sqrt1p", _sqrt1p, lambda t: t / _sqrt1p(t), lambda t: _sqrt1p(t) ** -3, 1.0, True, 1.0, 1.0,
        (2.0, 2.0, 1.0, 1.0),
    ),
    # log cosh: convex, derivative tanh bounded by one
    "soft-well": Phi1D(
        "soft-well",
        lambda t: np.logaddexp(t, -t) - math.log(2.0),
        np.tanh,
        lambda t: 1.0 / np.cosh(t) ** 2,
        -math.log(2.0),
        True,
        1.0,
        1.0,
        (2.0, 2.0, 1.0, 1.0),
    ),
    # unbounded below; only for direct integral checks
    "linear": Phi1D("linear", lambda t: np.asarray(t, dtype=float), np.ones_like, np.zeros_like, None, True, 1.0, 0.0),
}


def _sine_panel(n, s_quad_points):
    z, w = leggauss(s_quad_points)
    s = 0.5 * (z + 1.0)
    w = 0.5 * w
    k = np.arange(1, n + 1)[:, None]
    table = math.sqrt(2.0) * np.sin(math.pi * k * s[None, :])
    return table, w


def composite_potential(phi, n, spectrum=None, s_quad_points=64, check_lower_bound=True):
    """``Phi_n(x) = int_0^1 phi(sum_k x_k sqrt(2) sin(k pi s)) ds``.

    The s-integral uses a fixed Gauss-Legendre panel; gradient and Hessian
    are the sine coefficients of ``phi' o u`` and ``phi'' o u`` on the same
    panel, so they are the exact derivatives of the discretized value.

    Parameters
    ----------
    phi : str or Phi1D
        Library name or a scalar bundle.
    spectrum : CovSpectrum, optional
        Must carry the ``"sine-dirichlet"`` basis label when given.
    """
    if isinstance(phi, str):
        try:
            phi = PHI_LIBRARY[phi]
        except KeyError:
            raise InvalidArgumentError(f"potential.phi: unknown phi {phi!r}") from None
    if spectrum is not None and spectrum.basis_label != "sine-dirichlet":
        raise PreconditionError("composite potentials live on the sine-dirichlet basis")
    if check_lower_bound and phi.lower_bound is None:
        raise PreconditionError(f"phi {phi.name!r} is not bounded from below")
    table, w = _sine_panel(n, s_quad_points)

    def field(x):
        return np.asarray(x, dtype=float) @ table

    def value(x):
        return phi.f(field(x)) @ w

    def gradient(x):
        return (phi.df(field(x)) * w) @ table.T

    hess = None
    if phi.d2f is not None:

        def hess(x):
            return np.einsum("...j,aj,bj->...ab", phi.d2f(field(x)) * w, table, table)

    return Potential(
        n,
        value,
        gradient,
        hess,
        lower_bound=phi.lower_bound,
        convex=phi.convex,
        grad_sup_norm=phi.deriv_sup,
        grad_lipschitz=phi.deriv_lipschitz,
        growth=phi.growth,
        differentiable=phi.d2f is not None or phi.name == "zero",
        label=f"composite({phi.name},{n},{s_quad_points})" if phi.name != "zero" else "zero",
    )


def scale_for_smallness(p: Potential, delta: float) -> Potential:
    """Rescale so that the gradient sup-norm becomes ``pi / (2 + delta)``."""
    if delta <= 0.0:
        raise InvalidArgumentError("delta must be positive")
    if p.grad_sup_norm is None or not math.isfinite(p.grad_sup_norm) or p.grad_sup_norm <= 0.0:
        raise PreconditionError("scale_for_smallness needs a finite positive grad_sup_norm")
    target = math.pi / (2.0 + delta)
    out = p.scaled(target / p.grad_sup_norm)
    return replace(out, grad_sup_norm=target)


def smallness_check(p: Potential, largest_eigenvalue: float) -> dict:
    """Compare ``||D Phi||_inf^2`` with ``1 / (4 * largest_eigenvalue)``."""
    if p.grad_sup_norm is None:
        raise PreconditionError("potential has no gradient sup-norm")
    lhs = p.grad_sup_norm**2
    bound = 1.0 / (4.0 * largest_eigenvalue)
    return {
        "identity_tag": "gradient-smallness",
        "grad_sup_norm_sq": lhs,
        "bound": bound,
        "slack": bound - lhs,
        "pass": bool(lhs < bound),
    }


def moreau_yoshida(p: Potential, t: float, u, tol=1e-10, max_iter=10_000):
    """Moreau-Yoshida envelope of a convex potential.

    Returns
    -------
    value : float
        ``Phi_t(u) = min_x Phi(x) + |u - x|^2 / (2 t)``.
    gradient : ndarray
        ``(u - prox) / t``.
    prox : ndarray
        The unique minimizer.

    Raises
    ------
    UnsupportedError
        For non-convex potentials, or non-differentiable ones without ``prox``.
    NumericalFailure
        If gradient descent has not reached ``tol`` after ``max_iter`` steps.
    """
    if not p.convex:
        raise UnsupportedError("Moreau-Yoshida approximation is only defined here for convex potentials")
    if t <= 0.0:
        raise InvalidArgumentError("t must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != p.dim:
        raise InvalidArgumentError(f"u has dimension {u.size}, potential has {p.dim}")

    if p.prox is not None:
        x = np.asarray(p.prox(u, t), dtype=float)
    elif not p.differentiable:
        raise UnsupportedError("non-differentiable potential without a closed-form prox")
    else:
        x = _prox_descent(p, t, u, tol, max_iter)
    value = float(p.value(x) + np.dot(u - x, u - x) / (2.0 * t))
    return value, (u - x) / t, x


def _prox_descent(p, t, u, tol, max_iter):
    def objective(x):
        return float(p.value(x)) + np.dot(x - u, x - u) / (2.0 * t)

    def grad(x):
        return p.gradient(x) + (x - u) / t

    # with a known Lipschitz constant the fixed step 1/(1/t + L) contracts by tL/(1+tL)
    fixed = p.grad_lipschitz is not None
    step = t / (1.0 + t * p.grad_lipschitz) if fixed else t
    x = u.copy()
    fx, gx = objective(x), grad(x)
    res = float(np.linalg.norm(gx))
    for _ in range(max_iter):
        if res <= tol:
            return x
        cand = x - step * gx
        fc = objective(cand)
        if not fixed:
            # Armijo backtracking; decreases below rounding level count as accepted
            while fc > fx - 0.5 * step * res * res + 1e-15 * abs(fx) and step > 1e-16:
                step *= 0.5
                cand = x - step * gx
                fc = objective(cand)
        x, fx = cand, fc
        gx = grad(x)
        res = float(np.linalg.norm(gx))
        if not fixed:
            step = min(step * 1.5, t)
    if res <= tol:
        return x
    raise NumericalFailure(f"prox solver stopped at residual {res:.3e}", residual=res)


def potential_from_config(cfg, n):
    """Builtin potential from e.g. ``{"kind": "composite", "phi": "sqrt1p", "delta": 2}``."""
    if cfg is None:
        return zero_potential(n)
    kind = cfg.get("kind", "zero")
    if kind == "zero":
        p = zero_potential(n)
    elif kind == "quadratic":
        p = quadratic_potential(n, cfg.get("scale", 1.0))
    elif kind == "abs":
        p = abs_potential(n, cfg.get("weights"))
    elif kind == "composite":
        p = composite_potential(cfg.get("phi", "sqrt1p"), n, s_quad_points=cfg.get("s_quad_points", 64))
    else:
        raise InvalidArgumentError(f"potential.kind: unknown kind {kind!r}")
    if "delta" in cfg:
        p = scale_for_smallness(p, float(cfg["delta"]))
    return p
