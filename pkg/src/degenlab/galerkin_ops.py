"""Finite-dimensional Kolmogorov operators applied pointwise.

Coordinates are ``x`` (position, first ``n``) and ``y`` (velocity, last
``n``). Every ``apply_*`` accepts a single point or a batch with the
coordinates on the last axis. The ``*_kernel`` functions act on derivative
arrays directly and are shared with the spectral assembly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import functions as fns
from .errors import DomainError, InvalidArgumentError
from .gauss import DEFAULT_GRID_BUDGET, ProjectedGaussian, quadrature

__all__ = [
    "GalerkinModel",
    "dirichlet_identity",
    "model_from_config",
    "load_model",
    "n_kernel",
    "s_kernel",
    "a_kernel",
    "apply_N0",
    "apply_N",
    "apply_S",
    "apply_A",
    "apply_L",
    "ground_state_factor",
    "ground_state_conjugate",
    "reduced_C",
    "apply_PA2P",
    "grad_N",
    "grad_L",
]

_INV_TOL = 1e-10


def _sym(a):
    return 0.5 * (a + a.T)


def _min_sym_eig(a):
    return float(np.linalg.eigvalsh(_sym(a))[0])


@dataclass(frozen=True)
class GalerkinModel:
    """Truncated coefficients of the position/velocity operators.

    ``q1`` and ``q2`` hold the diagonal entries of the covariances; ``c``,
    ``k12``, ``k21``, ``k22`` are ``n x n`` matrices; ``tau1`` and ``tau2``
    are claimed lower bounds for ``sym(q1^-1 c)`` and ``sym(k22 q2^-1)`` and
    are checked at construction.
    """

    n: int
    q1: np.ndarray
    q2: np.ndarray
    c: np.ndarray
    k12: np.ndarray
    k21: np.ndarray
    k22: np.ndarray
    tau1: float
    tau2: float
    label: str = "custom"

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise InvalidArgumentError("model.n: must be >= 1")
        for name in ("q1", "q2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 2:
                if not np.allclose(v, np.diag(np.diag(v))):
                    raise InvalidArgumentError(f"model.{name}: must be diagonal")
                v = np.diag(v)
            v = v.reshape(-1).copy()
            if v.size != n or np.any(v <= 0.0):
                raise InvalidArgumentError(f"model.{name}: expected {n} positive diagonal entries")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name in ("c", "k12", "k21", "k22"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (n, n) or not np.all(np.isfinite(a)):
                raise InvalidArgumentError(f"model.{name}: expected a finite {n}x{n} matrix")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        scale = max(1.0, float(np.abs(self.c).max()))
        if not np.allclose(self.c, self.c.T, atol=_INV_TOL * scale):
            raise InvalidArgumentError("model.c: must be symmetric")
        if np.linalg.eigvalsh(_sym(self.c))[0] < -_INV_TOL * scale:
            raise InvalidArgumentError("model.c: must be positive semidefinite")
        if not (self.tau1 > 0.0 and self.tau2 > 0.0):
            raise InvalidArgumentError("model.tau1/tau2: must be positive (sym(q1^-1 c) and sym(k22 q2^-1) "
                                       "must be positive definite)")
        if _min_sym_eig(self.c / self.q1[:, None]) < self.tau1 * (1 - _INV_TOL) - _INV_TOL:
            raise InvalidArgumentError("model.tau1: sym(q1^-1 c) has a smaller eigenvalue")
        k22 = self.k22
        scale = max(1.0, float(np.abs(k22).max()))
        if not np.allclose(k22, k22.T, atol=_INV_TOL * scale) or np.linalg.eigvalsh(_sym(k22))[0] <= 0.0:
            raise InvalidArgumentError("model.k22: must be symmetric positive definite")
        if not np.allclose(self.k21, self.k12.T, atol=_INV_TOL * max(1.0, float(np.abs(self.k12).max()))):
            raise InvalidArgumentError("model.k21: must equal the transpose of k12")
        if _min_sym_eig(k22 / self.q2[None, :]) < self.tau2 * (1 - _INV_TOL) - _INV_TOL:
            raise InvalidArgumentError("model.tau2: sym(k22 q2^-1) has a smaller eigenvalue")

    @property
    def q1_inv(self):
        return 1.0 / self.q1

    @property
    def q2_inv(self):
        return 1.0 / self.q2

    def with_c(self, c, tau1=None):
        """Copy with a different ``c``; ``tau1`` defaults to the exact minimum."""
        c = np.asarray(c, dtype=float)
        if tau1 is None:
            tau1 = _min_sym_eig(c / self.q1[:, None])
        return replace(self, c=c, tau1=tau1)

    def position_measure(self):
        return ProjectedGaussian(self.q1)

    def velocity_measure(self):
        return ProjectedGaussian(self.q2)

    def phase_measure(self):
        return ProjectedGaussian(np.concatenate([self.q1, self.q2]))

    def to_dict(self):
        return {
            "n": self.n,
            "q1": self.q1.tolist(),
            "q2": self.q2.tolist(),
            "c": self.c.tolist(),
            "k12": self.k12.tolist(),
            "k21": self.k21.tolist(),
            "k22": self.k22.tolist(),
            "tau1": self.tau1,
            "tau2": self.tau2,
            "label": self.label,
        }


def dirichlet_identity(n, c=None):
    """Dirichlet-Laplacian model with ``k12 = k21 = k22 = Id``.

    ``q1 = q2 = diag(1 / (k^2 pi^2))``. ``c`` defaults to ``k21 q2^-1 k12``.
    """
    a = np.array([(k * math.pi) ** 2 for k in range(1, n + 1)])
    q = 1.0 / a
    eye = np.eye(n)
    c = np.diag(a) if c is None else np.asarray(c, dtype=float)
    return GalerkinModel(
        n,
        q,
        q,
        c,
        eye,
        eye,
        eye,
        tau1=_min_sym_eig(c * a[:, None]),
        tau2=float(a.min()),
        label="dirichlet-identity",
    )


def model_from_config(cfg, key="model"):
    """Model from a JSON-like dict: explicit matrices or ``{"generator": ...}``."""
    if not isinstance(cfg, dict):
        raise InvalidArgumentError(f"{key}: expected an object")
    if "generator" in cfg:
        if cfg["generator"] != "dirichlet-identity":
            raise InvalidArgumentError(f"{key}.generator: unknown generator {cfg['generator']!r}")
        return dirichlet_identity(int(cfg.get("n", 1)), cfg.get("c"))
    missing = [k for k in ("n", "q1", "q2", "c", "k12", "k21", "k22", "tau1", "tau2") if k not in cfg]
    if missing:
        raise InvalidArgumentError(f"{key}.{missing[0]}: required field missing")
    try:
        return GalerkinModel(
            int(cfg["n"]), cfg["q1"], cfg["q2"], cfg["c"], cfg["k12"], cfg["k21"], cfg["k22"],
            float(cfg["tau1"]), float(cfg["tau2"]), cfg.get("label", "custom"),
        )
    except InvalidArgumentError as exc:
        msg = str(exc)
        raise InvalidArgumentError(msg.replace("model.", f"{key}.", 1)) from None


def load_model(path):
    with open(path) as fh:
        return model_from_config(json.load(fh))


# --------------------------------------------------------------------------
# derivative-array kernels
# --------------------------------------------------------------------------


def n_kernel(c, q1_inv, x, grad, hess, dphi=None):
    """``tr[c H] - <x, q1^-1 c g> - <D Phi, c g>`` on batched derivative arrays."""
    cg = grad @ c.T
    out = np.einsum("ij,...ji->...", c, hess) - np.sum(x * q1_inv * cg, axis=-1)
    if dphi is not None:
        out = out - np.sum(dphi * cg, axis=-1)
    return out


def s_kernel(m: GalerkinModel, y, grad_y, hess_yy):
    return np.einsum("ij,...ji->...", m.k22, hess_yy) - np.sum(y * m.q2_inv * (grad_y @ m.k22.T), axis=-1)


def a_kernel(m: GalerkinModel, x, y, grad_x, grad_y, dphi=None):
    kg = grad_y @ m.k21.T
    out = np.sum(x * m.q1_inv * kg, axis=-1) - np.sum(y * m.q2_inv * (grad_x @ m.k12.T), axis=-1)
    if dphi is not None:
        out = out + np.sum(dphi * kg, axis=-1)
    return out


def _as_points(x, n, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise InvalidArgumentError(f"{name} must have last dimension {n}, got shape {x.shape}")
    return x


def _check_fdim(f, dim):
    if f.dim != dim:
        raise InvalidArgumentError(f"function dimension {f.dim} does not match operator dimension {dim}")


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def _potential_grad(p, x):
    """``D Phi(x)`` or None for the zero potential; infinite values are rejected."""
    if p is None or p.is_zero:
        return None
    if p.dim != x.shape[-1]:
        raise InvalidArgumentError(f"potential dimension {p.dim} does not match {x.shape[-1]}")
    if not np.all(np.isfinite(p.value(x))):
        raise DomainError("potential is infinite at the evaluation point")
    return p.gradient(x)


def apply_N0(m: GalerkinModel, f, x):
    _check_fdim(f, m.n)
    x = _as_points(x, m.n)
    return _out(n_kernel(m.c, m.q1_inv, x, f.gradient(x), f.hessian(x)))


def apply_N(m: GalerkinModel, p, f, x):
    _check_fdim(f, m.n)
    x = _as_points(x, m.n)
    dphi = _potential_grad(p, x)
    return _out(n_kernel(m.c, m.q1_inv, x, f.gradient(x), f.hessian(x), dphi))


def _phase(m, f, x, y):
    _check_fdim(f, 2 * m.n)
    x = _as_points(x, m.n)
    y = _as_points(y, m.n, "y")
    z = np.concatenate(np.broadcast_arrays(x, y), axis=-1)
    return x, y, z


def apply_S(m: GalerkinModel, f, x, y):
    x, y, z = _phase(m, f, x, y)
    n = m.n
    return _out(s_kernel(m, y, f.gradient(z)[..., n:], f.hessian(z)[..., n:, n:]))


def apply_A(m: GalerkinModel, p, f, x, y):
    x, y, z = _phase(m, f, x, y)
    n = m.n
    g = f.gradient(z)
    return _out(a_kernel(m, x, y, g[..., :n], g[..., n:], _potential_grad(p, x)))


def apply_L(m: GalerkinModel, p, f, x, y):
    x, y, z = _phase(m, f, x, y)
    n = m.n
    g = f.gradient(z)
    h = f.hessian(z)
    s = s_kernel(m, y, g[..., n:], h[..., n:, n:])
    a = a_kernel(m, x, y, g[..., :n], g[..., n:], _potential_grad(p, x))
    return _out(s - a)


def ground_state_factor(m: GalerkinModel):
    """``exp(<q1^-1 x, x>/4 + <q2^-1 y, y>/4)``, the multiplier taking flat functions to ``L^2(mu)``."""
    return fns.exp_quadratic(0.25 * np.diag(np.concatenate([m.q1_inv, m.q2_inv])))


def ground_state_conjugate(m: GalerkinModel, phi, x, y):
    """``tr[k22 D_y^2 phi] - <q2^-1 k22 q2^-1 y, y> phi / 4 + tr[k22 q2^-1] phi / 2``."""
    x, y, z = _phase(m, phi, x, y)
    n = m.n
    h = phi.hessian(z)[..., n:, n:]
    v = phi.value(z)
    w = m.q2_inv[:, None] * m.k22 * m.q2_inv[None, :]
    quad = np.einsum("...i,ij,...j->...", y, w, y)
    return _out(np.einsum("ij,...ji->...", m.k22, h) - 0.25 * quad * v + 0.5 * np.trace(m.k22 * m.q2_inv[None, :]) * v)


def reduced_C(m: GalerkinModel):
    """``k21 q2^-1 k12``."""
    out = (m.k21 * m.q2_inv[None, :]) @ m.k12
    return _sym(out)


def apply_PA2P(m: GalerkinModel, p, f, x, points_per_axis=12, budget=DEFAULT_GRID_BUDGET):
    """Reduced operator applied to the velocity average of ``f``.

    ``f_S(x) = int f(x, y) mu_2(dy)`` is computed on a fixed Gauss-Hermite
    rule; its derivatives are averages of the analytic x-derivatives of
    ``f`` at the same nodes.
    """
    _check_fdim(f, 2 * m.n)
    n = m.n
    x = _as_points(x, n)
    rule = quadrature(m.velocity_measure(), points_per_axis, budget)
    ynodes = rule.nodes
    batch = x.shape[:-1]
    xz = np.broadcast_to(x[..., None, :], batch + (rule.size, n))
    yz = np.broadcast_to(ynodes, batch + (rule.size, n))
    z = np.concatenate([xz, yz], axis=-1)
    w = rule.weights
    grad = np.einsum("k,...ki->...i", w, f.gradient(z)[..., :n])
    hess = np.einsum("k,...kij->...ij", w, f.hessian(z)[..., :n, :n])
    return _out(n_kernel(reduced_C(m), m.q1_inv, x, grad, hess, _potential_grad(p, x)))


# --------------------------------------------------------------------------
# gradients of operator images, needed by the regularity identities
# --------------------------------------------------------------------------


def _require_third(f):
    if f.third is None:
        raise InvalidArgumentError("function must provide third derivatives")


def _potential_hess(p, x):
    if p is None or p.is_zero:
        return None
    if p.hessian is None:
        raise InvalidArgumentError("potential must provide a Hessian")
    return p.hessian(x)


def grad_N(m: GalerkinModel, p, f, x):
    """``D(N f)(x)``, using the third derivative of ``f`` and the Hessian of ``Phi``."""
    _check_fdim(f, m.n)
    _require_third(f)
    x = _as_points(x, m.n)
    g, h, t = f.gradient(x), f.hessian(x), f.third(x)
    cg = g @ m.c.T
    out = np.einsum("ij,...jik->...k", m.c, t) - m.q1_inv * cg
    out = out - np.einsum("...j,...jk->...k", (x * m.q1_inv) @ m.c, h)
    dphi = _potential_grad(p, x)
    if dphi is not None:
        out = out - np.einsum("...kj,...j->...k", _potential_hess(p, x), cg)
        out = out - np.einsum("...j,...jk->...k", dphi @ m.c, h)
    return out


def grad_L(m: GalerkinModel, p, f, x, y):
    """``D(L f)(x, y)`` in all ``2n`` coordinates."""
    x, y, z = _phase(m, f, x, y)
    _require_third(f)
    n = m.n
    g, h, t = f.gradient(z), f.hessian(z), f.third(z)
    gx, gy = g[..., :n], g[..., n:]
    hx, hy = h[..., :n, :], h[..., n:, :]
    out = np.einsum("ij,...jik->...k", m.k22, t[..., n:, n:, :])
    v = (x * m.q1_inv) @ m.k21
    dphi = _potential_grad(p, x)
    if dphi is not None:
        v = v + dphi @ m.k21
    out = out - np.einsum("...j,...jk->...k", (y * m.q2_inv) @ m.k22 + v, hy)
    out = out + np.einsum("...j,...jk->...k", (y * m.q2_inv) @ m.k12, hx)
    kgy = gy @ m.k21.T
    out[..., n:] += m.q2_inv * (gx @ m.k12.T - gy @ m.k22.T)
    out[..., :n] -= m.q1_inv * kgy
    if dphi is not None:
        out[..., :n] -= np.einsum("...kj,...j->...k", _potential_hess(p, x), kgy)
    return out
