"""Centered Gaussian measures on truncated coordinate spaces.

Everything here works on the coordinates ``x = (x_1, ..., x_n)`` of a point
with respect to an eigenbasis of the covariance operator, so every projected
measure is a product of one-dimensional centered normals.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import InvalidArgumentError, PreconditionError, ResourceLimitError

__all__ = [
    "CovSpectrum",
    "ProjectedGaussian",
    "QuadratureRule",
    "DEFAULT_GRID_BUDGET",
    "MC_CHUNK",
    "project_measure",
    "moment2",
    "moment4",
    "sample",
    "quadrature",
    "reweight",
    "weighted_expectation",
    "estimate_record",
    "spectrum_from_config",
]

DEFAULT_GRID_BUDGET = 10**7
# Fixed chunk length for seeded sampling; results never depend on worker count.
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class CovSpectrum:
    """Eigenvalues of a trace-class covariance operator, largest first.

    Parameters
    ----------
    eigenvalues : sequence of float
        Strictly positive and non-increasing.
    basis_label : str
        Name of the eigenbasis, e.g. ``"sine-dirichlet"``.
    space_tag : str
        ``"U"`` (position) or ``"V"`` (velocity).
    """

    eigenvalues: tuple
    basis_label: str = "generic"
    space_tag: str = "U"

    def __post_init__(self):
        ev = tuple(float(v) for v in self.eigenvalues)
        if len(ev) == 0:
            raise InvalidArgumentError("spectrum.eigenvalues: empty spectrum")
        arr = np.asarray(ev)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise InvalidArgumentError(
                "spectrum.eigenvalues: eigenvalues must be finite and strictly positive"
            )
        if np.any(np.diff(arr) > 0.0):
            raise InvalidArgumentError("spectrum.eigenvalues: eigenvalues must be non-increasing")
        if self.space_tag not in ("U", "V"):
            raise InvalidArgumentError(f"spectrum.space_tag: expected 'U' or 'V', got {self.space_tag!r}")
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def dirichlet(cls, n, space_tag="U"):
        """Inverse negative Dirichlet Laplacian on (0, 1): ``1 / (k^2 pi^2)``."""
        if n < 1:
            raise InvalidArgumentError("spectrum.n: must be >= 1")
        ev = tuple(1.0 / (k * k * math.pi**2) for k in range(1, n + 1))
        return cls(ev, "sine-dirichlet", space_tag)

    def __len__(self):
        return len(self.eigenvalues)

    def partial_trace(self, n):
        return math.fsum(self.eigenvalues[:n])

    @property
    def largest(self):
        return self.eigenvalues[0]


@dataclass(frozen=True)
class ProjectedGaussian:
    """Image of a Gaussian measure under the first ``n`` eigen-coordinates."""

    variances: np.ndarray

    def __post_init__(self):
        v = np.array(self.variances, dtype=float).reshape(-1)
        if v.size == 0 or np.any(v <= 0.0) or not np.all(np.isfinite(v)):
            raise InvalidArgumentError("variances must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)

    @property
    def dim(self):
        return self.variances.size

    @property
    def covariance(self):
        return np.diag(self.variances)

    def product(self, other):
        """Product measure on the concatenated coordinates ``(x, y)``."""
        return ProjectedGaussian(np.concatenate([self.variances, other.variances]))


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor rule ``sum_k w_k f(nodes_k)`` approximating a Gaussian integral.

    ``exact_degree`` holds the per-axis polynomial degree integrated exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: tuple

    @property
    def size(self):
        return self.weights.size

    def integrate(self, values):
        """Contract ``values`` (leading axis over nodes) against the weights."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def project_measure(spectrum: CovSpectrum, n: int) -> ProjectedGaussian:
    """Image measure of the first ``n`` coordinates: ``diag(lambda_1..lambda_n)``."""
    if n <= 0:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    if n > len(spectrum):
        raise InvalidArgumentError(f"spectrum holds {len(spectrum)} eigenvalues, requested {n}")
    return ProjectedGaussian(np.array(spectrum.eigenvalues[:n]))


def _check_vectors(g, *vectors):
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if v.shape != (g.dim,):
            raise InvalidArgumentError(f"expected a vector of dimension {g.dim}, got shape {v.shape}")
        out.append(v)
    return out


def moment2(l1, l2, g: ProjectedGaussian) -> float:
    """``E[<x, l1><x, l2>] = <Q l1, l2>``."""
    l1, l2 = _check_vectors(g, l1, l2)
    return float(np.dot(g.variances * l1, l2))


def moment4(l1, l2, l3, l4, g: ProjectedGaussian) -> float:
    """Fourth mixed moment by the three Wick pairings."""
    l1, l2, l3, l4 = _check_vectors(g, l1, l2, l3, l4)
    q = g.variances

    def c(a, b):
        return np.dot(q * a, b)

    return float(c(l1, l2) * c(l3, l4) + c(l1, l3) * c(l2, l4) + c(l1, l4) * c(l2, l3))


def _normal_chunks(seed, count, dim, workers=None):
    n_chunks = -(-count // MC_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(MC_CHUNK, count - i * MC_CHUNK) for i in range(n_chunks)]

    def draw(i):
        return np.random.default_rng(seqs[i]).standard_normal((sizes[i], dim))

    if workers and workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(draw, range(n_chunks)))
    else:
        parts = [draw(i) for i in range(n_chunks)]
    return np.concatenate(parts, axis=0)


def sample(g: ProjectedGaussian, count: int, seed: int, workers=None) -> np.ndarray:
    """Draw ``count`` i.i.d. points, shape ``(count, n)``.

    Chunk ``i`` of :data:`MC_CHUNK` rows always comes from child ``i`` of
    ``SeedSequence(seed)``, so the output is identical for any ``workers``.
    """
    if count < 0:
        raise InvalidArgumentError(f"count must be non-negative, got {count}")
    if count == 0:
        return np.empty((0, g.dim))
    return _normal_chunks(seed, count, g.dim, workers) * np.sqrt(g.variances)


def quadrature(g: ProjectedGaussian, points_per_axis, budget: int = DEFAULT_GRID_BUDGET) -> QuadratureRule:
    """Tensor Gauss-Hermite rule for ``g``.

    Parameters
    ----------
    points_per_axis : int or sequence of int
        Number of probabilists' Gauss-Hermite nodes on each axis. Axis ``i``
        nodes are scaled by ``sqrt(lambda_i)``.
    budget : int
        Maximum number of tensor nodes.

    Raises
    ------
    ResourceLimitError
        If the tensor grid exceeds ``budget``.
    """
    if np.ndim(points_per_axis) == 0:
        pts = [int(points_per_axis)] * g.dim
    else:
        pts = [int(p) for p in points_per_axis]
        if len(pts) != g.dim:
            raise InvalidArgumentError(f"points_per_axis has {len(pts)} entries for dimension {g.dim}")
    if min(pts) < 1:
        raise InvalidArgumentError("points_per_axis must be >= 1")
    total = math.prod(pts)
    if total > budget:
        raise ResourceLimitError(f"tensor grid of {total} nodes exceeds budget {budget}; use Monte Carlo")

    axes_nodes, axes_weights = [], []
    for p, var in zip(pts, g.variances):
        z, w = hermegauss(p)
        axes_nodes.append(z * math.sqrt(var))
        axes_weights.append(w / w.sum())
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    nodes = np.stack([a.reshape(-1) for a in grids], axis=-1)
    wgrid = axes_weights[0]
    for w in axes_weights[1:]:
        wgrid = np.multiply.outer(wgrid, w)
    weights = wgrid.reshape(-1)
    return QuadratureRule(nodes, weights, tuple(2 * p - 1 for p in pts))


def _require_lower_bound(potential):
    if potential is not None and potential.lower_bound is None:
        raise PreconditionError("potential must carry a lower bound to define the reweighted measure")


def reweight(weights, phi_values):
    """Self-normalized weights ``w exp(-Phi) / sum(w exp(-Phi))``.

    Returns the input weights untouched when ``Phi`` vanishes identically.
    """
    phi_values = np.asarray(phi_values, dtype=float)
    if not np.any(phi_values):
        return weights
    if np.any(np.isnan(phi_values)):
        raise InvalidArgumentError("potential evaluated to NaN")
    shift = np.min(phi_values)
    e = weights * np.exp(-(phi_values - shift))
    return e / e.sum()


def _potential_values(potential, points):
    n = potential.dim
    return potential.value(points[..., :n])


def _fvalues(f, points):
    fn = getattr(f, "value", f)
    return np.asarray(fn(points), dtype=float)


def weighted_expectation(
    f,
    g: ProjectedGaussian,
    potential=None,
    method: str = "quadrature",
    budget=None,
    seed: int = 0,
    workers=None,
):
    """Expectation of ``f`` under ``g`` or under ``rho_Phi g``.

    ``rho_Phi = exp(-Phi) / c_Phi`` with ``c_Phi`` integrated on the same node
    set as the numerator. ``potential`` acts on the leading ``potential.dim``
    coordinates.

    Parameters
    ----------
    f : SmoothFunction or callable
        Vectorized over a leading batch axis.
    method : {"quadrature", "mc"}
    budget : int
        Points per axis (quadrature) or sample count (mc).

    Returns
    -------
    value, error : float
        ``error`` is ``|value(p) - value(p - 1)|`` for quadrature and the
        standard error of the self-normalized mean for Monte Carlo.
    """
    _require_lower_bound(potential)
    if method == "quadrature":
        p = 20 if budget is None else int(budget)

        def level(pp):
            rule = quadrature(g, pp)
            w = rule.weights
            if potential is not None:
                w = reweight(w, _potential_values(potential, rule.nodes))
            return float(np.dot(w, _fvalues(f, rule.nodes)))

        value = level(p)
        error = abs(value - level(p - 1)) if p > 1 else float("inf")
        return value, error
    if method == "mc":
        count = 10**5 if budget is None else int(budget)
        if count < 2:
            raise InvalidArgumentError("Monte Carlo needs at least two samples")
        pts = sample(g, count, seed, workers)
        fv = _fvalues(f, pts)
        if potential is None:
            return float(fv.mean()), float(fv.std(ddof=1) / math.sqrt(count))
        phi = _potential_values(potential, pts)
        if not np.any(phi):
            return float(fv.mean()), float(fv.std(ddof=1) / math.sqrt(count))
        e = np.exp(-(phi - phi.min()))
        value = float(np.dot(e, fv) / e.sum())
        se = float(math.sqrt(np.sum((e * (fv - value)) ** 2)) / e.sum())
        return value, se
    raise InvalidArgumentError(f"method must be 'quadrature' or 'mc', got {method!r}")


def estimate_record(value, error, method, nodes_or_samples, seed=None):
    """JSON-ready record of one integral estimate."""
    return {
        "value": float(value),
        "error": float(error),
        "method": method,
        "nodes_or_samples": int(nodes_or_samples),
        "seed": seed,
    }


def spectrum_from_config(cfg, key="spectrum", space_tag="U"):
    """Build a spectrum from ``{"eigenvalues": [...]}`` or ``{"generator": "dirichlet", "n": k}``."""
    if not isinstance(cfg, dict):
        raise InvalidArgumentError(f"{key}: expected an object")
    if "eigenvalues" in cfg:
        return CovSpectrum(tuple(cfg["eigenvalues"]), cfg.get("basis_label", "generic"), space_tag)
    gen = cfg.get("generator")
    if gen == "dirichlet":
        return CovSpectrum.dirichlet(int(cfg.get("n", 1)), space_tag)
    raise InvalidArgumentError(f"{key}.generator: unknown generator {gen!r}")
