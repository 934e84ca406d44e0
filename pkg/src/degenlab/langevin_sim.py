"""Spectral Galerkin simulation of the damped stochastic wave system.

In the sine basis ``sqrt(2) sin(k pi s)`` each mode ``k`` with
``a_k = k^2 pi^2`` evolves as

    du_k = a_k v_k dt
    dv_k = (-a_k u_k - a_k v_k - d_k Phi(u)) dt + sqrt(2) dW_k

which is the diffusion generated by the Langevin operator of the model with
``k12 = k21 = k22 = Id`` and ``q1 = q2 = diag(1 / a_k)``. The modes are
independent standard Brownian motions; the initial state defaults to zero.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import galerkin_ops as ops
from .errors import InvalidArgumentError, NumericalFailure, PreconditionError
from .gauss import weighted_expectation
from .potential import Potential

__all__ = [
    "SimConfig",
    "TrajectoryEnsemble",
    "ModeBlocks",
    "SIM_CHUNK",
    "mode_coefficients",
    "transient_covariance",
    "simulate",
    "invariant_check",
    "generator_consistency",
    "write_moment_csv",
    "write_timeseries_csv",
]

# Fixed ensemble chunk; each chunk owns one RNG substream.
SIM_CHUNK = 1024


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    ``burn_in`` defaults to 20% of ``steps``; ``record_every`` to the stride
    giving about 200 stored times. ``x0``/``y0`` default to zero.
    """

    n_modes: int
    dt: float
    steps: int
    ensemble: int
    scheme: str = "semi-implicit"
    potential: Optional[Potential] = None
    seed: int = 0
    burn_in: Optional[int] = None
    record_every: Optional[int] = None
    x0: Optional[tuple] = None
    y0: Optional[tuple] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n_modes < 1:
            raise InvalidArgumentError("n_modes: must be >= 1")
        if not self.dt > 0.0:
            raise InvalidArgumentError("dt: must be positive")
        if self.steps < 1 or self.ensemble < 1:
            raise InvalidArgumentError("steps and ensemble must be >= 1")
        if self.scheme not in ("euler", "semi-implicit"):
            raise InvalidArgumentError(f"scheme: expected 'euler' or 'semi-implicit', got {self.scheme!r}")
        if self.scheme == "euler":
            # per-mode amplification |1 + dt mu|^2 = 1 - dt a + (dt a)^2 needs dt a < 1
            limit = 1.0 / (self.n_modes * math.pi) ** 2
            if self.dt >= limit:
                raise InvalidArgumentError(f"dt: explicit Euler with {self.n_modes} modes needs dt < {limit:.6g}")
        if self.potential is not None and self.potential.dim != self.n_modes:
            raise InvalidArgumentError("potential: dimension must equal n_modes")
        if self.burn_in is not None and not 0 <= self.burn_in < self.steps:
            raise InvalidArgumentError("burn_in: must lie in [0, steps)")
        for name in ("x0", "y0"):
            v = getattr(self, name)
            if v is not None and len(v) != self.n_modes:
                raise InvalidArgumentError(f"{name}: expected {self.n_modes} entries")

    @property
    def burn(self):
        return self.steps // 5 if self.burn_in is None else self.burn_in

    @property
    def stride(self):
        return max(1, self.steps // 200) if self.record_every is None else int(self.record_every)


@dataclass(frozen=True)
class ModeBlocks:
    """Per-mode linear drift blocks ``[[0, a], [-a, -a]]`` and noise ``(0, sqrt 2)``."""

    a: np.ndarray
    blocks: np.ndarray
    noise: np.ndarray


def mode_coefficients(n_modes) -> ModeBlocks:
    if n_modes < 1:
        raise InvalidArgumentError("n_modes: must be >= 1")
    a = np.array([(k * math.pi) ** 2 for k in range(1, n_modes + 1)])
    blocks = np.zeros((n_modes, 2, 2))
    blocks[:, 0, 1] = a
    blocks[:, 1, 0] = -a
    blocks[:, 1, 1] = -a
    noise = np.zeros((n_modes, 2))
    noise[:, 1] = math.sqrt(2.0)
    return ModeBlocks(a, blocks, noise)


def transient_covariance(a, t):
    """Covariance at time ``t`` of one linear mode started at zero: ``P - e^{Bt} P e^{Bt}^T``, ``P = I / a``."""
    b = np.array([[0.0, a], [-a, -a]])
    e = scipy.linalg.expm(b * t)
    p = np.eye(2) / a
    return p - e @ p @ e.T


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return v * np.sqrt(np.clip(w, 0.0, None))


def _exact_step(modes: ModeBlocks, dt):
    """Transition of every linear mode over ``dt``.

    The Gaussian increment is split into its regression on the Brownian
    increment ``dW`` and an independent remainder, so that both schemes can
    share ``dW``.
    """
    n = modes.a.size
    F = np.empty((n, 2, 2))
    reg = np.empty((n, 2))
    rest = np.empty((n, 2, 2))
    for k, (a, b, g) in enumerate(zip(modes.a, modes.blocks, modes.noise)):
        e = scipy.linalg.expm(b * dt)
        p = np.eye(2) / a
        sigma = p - e @ p @ e.T
        # Cov(increment, dW) = B^-1 (e^{B dt} - I) g
        c = np.linalg.solve(b, (e - np.eye(2)) @ g)
        F[k] = e
        reg[k] = c / dt
        rest[k] = _psd_sqrt(sigma - np.outer(c, c) / dt)
    return F, reg, rest


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Recorded states, shape ``(ensemble, len(times), 2 n)``, columns ``(u_1..u_n, v_1..v_n)``.

    ``stationary`` holds per-member time averages after burn-in of
    ``u, v, u^2, v^2, u v`` (each ``(ensemble, n)``), and the same for the
    two halves of the post-burn-in window.
    """

    times: np.ndarray
    states: np.ndarray
    seed: int
    scheme: str
    config: SimConfig
    stationary: dict = field(repr=False)
    halves: tuple = field(repr=False)
    post_burn_steps: int = 0

    @property
    def n_modes(self):
        return self.config.n_modes

    def save_npy(self, path):
        np.save(path, self.states)


_STAT_KEYS = ("u", "v", "uu", "vv", "uv")


def _run_chunk(cfg: SimConfig, modes, step_data, ss, members, record, steps, keep_noise=False):
    """Integrate one chunk of ``members`` trajectories."""
    rng = np.random.default_rng(ss)
    n = cfg.n_modes
    a = modes.a
    dt = cfg.dt
    sq = math.sqrt(dt)
    F, reg, rest = step_data
    u = np.zeros((members, n)) if cfg.x0 is None else np.tile(np.asarray(cfg.x0, float), (members, 1))
    v = np.zeros((members, n)) if cfg.y0 is None else np.tile(np.asarray(cfg.y0, float), (members, 1))
    pot = None if cfg.potential is None or cfg.potential.is_zero else cfg.potential
    out = [np.concatenate([u, v], axis=1)] if record else []
    burn = cfg.burn
    half = burn + (steps - burn) // 2
    acc = [dict((k, np.zeros((members, n))) for k in _STAT_KEYS) for _ in range(2)]
    counts = [0, 0]
    # noise-driven linear response, started at zero; used as a control variate
    nz_u = np.zeros((members, n)) if keep_noise else None
    nz_v = np.zeros((members, n)) if keep_noise else None
    noise_path = [] if keep_noise else None
    for step in range(1, steps + 1):
        z = rng.standard_normal((3, members, n))
        dW = sq * z[0]
        kick = None if pot is None else pot.gradient(u)
        if cfg.scheme == "semi-implicit":
            xi_u = reg[:, 0] * dW + rest[:, 0, 0] * z[1] + rest[:, 0, 1] * z[2]
            xi_v = reg[:, 1] * dW + rest[:, 1, 0] * z[1] + rest[:, 1, 1] * z[2]
            nu = F[:, 0, 0] * u + F[:, 0, 1] * v + xi_u
            nv = F[:, 1, 0] * u + F[:, 1, 1] * v + xi_v
            if keep_noise:
                nz_u, nz_v = (F[:, 0, 0] * nz_u + F[:, 0, 1] * nz_v + xi_u,
                              F[:, 1, 0] * nz_u + F[:, 1, 1] * nz_v + xi_v)
        else:
            nu = u + dt * a * v
            nv = v + dt * (-a * u - a * v) + math.sqrt(2.0) * dW
            if keep_noise:
                nz_u, nz_v = nz_u + dt * a * nz_v, nz_v + dt * (-a * nz_u - a * nz_v) + math.sqrt(2.0) * dW
        if kick is not None:
            nv = nv - dt * kick
        u, v = nu, nv
        if keep_noise:
            noise_path.append(np.concatenate([nz_u, nz_v], axis=1))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericalFailure(f"non-finite state at step {step}")
        if record and step % record == 0:
            out.append(np.concatenate([u, v], axis=1))
        if step > burn:
            h = 0 if step <= half else 1
            s = acc[h]
            s["u"] += u
            s["v"] += v
            s["uu"] += u * u
            s["vv"] += v * v
            s["uv"] += u * v
            counts[h] += 1
    states = np.stack(out, axis=1) if record else None
    return states, acc, counts, noise_path


def _chunks(cfg: SimConfig):
    sizes = [min(SIM_CHUNK, cfg.ensemble - s) for s in range(0, cfg.ensemble, SIM_CHUNK)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    return sizes, seeds


def _map(cfg, fn, items):
    workers = cfg.workers or 1
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def simulate(cfg: SimConfig) -> TrajectoryEnsemble:
    """Run the ensemble; identical configs give identical arrays for any worker count."""
    modes = mode_coefficients(cfg.n_modes)
    step_data = _exact_step(modes, cfg.dt)
    sizes, seeds = _chunks(cfg)
    stride = cfg.stride
    results = _map(
        cfg,
        lambda size, ss: _run_chunk(cfg, modes, step_data, ss, size, stride, cfg.steps),
        list(zip(sizes, seeds)),
    )
    states = np.concatenate([r[0] for r in results], axis=0)
    counts = results[0][2]
    halves = []
    for h in range(2):
        c = max(counts[h], 1)
        halves.append({k: np.concatenate([r[1][h][k] for r in results], axis=0) / c for k in _STAT_KEYS})
    total = max(sum(counts), 1)
    stationary = {
        k: (halves[0][k] * counts[0] + halves[1][k] * counts[1]) / total for k in _STAT_KEYS
    }
    times = np.arange(states.shape[1]) * stride * cfg.dt
    return TrajectoryEnsemble(times, states, cfg.seed, cfg.scheme, cfg, stationary, tuple(halves), sum(counts))


def _stat(per_member):
    m = float(per_member.mean())
    se = float(per_member.std(ddof=1) / math.sqrt(per_member.size)) if per_member.size > 1 else float("inf")
    return m, se


def invariant_check(ens: TrajectoryEnsemble, k: int, rel_tol=0.05, sigmas=3.0, quad_points=40) -> dict:
    """Stationary moments of mode ``k`` (1-based) against the invariant measure.

    Members are independent, so per-member time averages give standard
    errors. Without a potential the targets are ``Var(u_k) = Var(v_k) =
    1 / (k^2 pi^2)`` and ``Cov(u_k, v_k) = 0``; with a potential ``E[u_k^2]``
    is compared with its quadrature value under the reweighted measure.
    Second moments pass within ``rel_tol``; the covariance passes within
    ``sigmas`` standard errors without a potential and within ``rel_tol``
    of ``sqrt(E u_k^2 Var v_k)`` with one.
    """
    cfg = ens.config
    if not 1 <= k <= cfg.n_modes:
        raise InvalidArgumentError(f"mode {k} out of range 1..{cfg.n_modes}")
    if ens.post_burn_steps < 2 or cfg.ensemble < 2:
        raise PreconditionError("not enough post-burn-in samples for an invariant check")
    i = k - 1
    s = ens.stationary
    lam = 1.0 / (k * math.pi) ** 2
    mu_u, _ = _stat(s["u"][:, i])
    mu_v, _ = _stat(s["v"][:, i])
    uu, se_uu = _stat(s["uu"][:, i])
    vv, se_vv = _stat(s["vv"][:, i])
    uv, se_uv = _stat(s["uv"][:, i])
    var_u = uu - mu_u**2
    var_v = vv - mu_v**2
    cov = uv - mu_u * mu_v
    pot = cfg.potential
    if pot is None or pot.is_zero:
        target_u = lam
        qty_u = ("var_u", var_u, se_uu)
    else:
        from .gauss import ProjectedGaussian

        meas = ProjectedGaussian(1.0 / mode_coefficients(cfg.n_modes).a)
        target_u, _ = weighted_expectation(lambda z: z[:, i] ** 2, meas, pot, budget=quad_points)
        qty_u = ("second_moment_u", uu, se_uu)

    def row(name, est, se, target, use_rel, scale=None):
        z = (est - target) / se if se > 0 else float("inf")
        scale = abs(target) if scale is None else scale
        rel = abs(est - target) / scale if scale != 0 else float("nan")
        ok = rel <= rel_tol if use_rel else abs(z) <= sigmas
        return {"quantity": name, "estimate": est, "se": se, "target": target, "z": z, "rel_dev": rel, "pass": bool(ok)}

    # with a potential the splitting step has an O(dt) bias, so the covariance is
    # judged relative to sqrt(E u^2 Var v) instead of by its standard error
    flat = pot is None or pot.is_zero
    rows = [
        row(qty_u[0], qty_u[1], qty_u[2], target_u, True),
        row("var_v", var_v, se_vv, lam, True),
        row("cov_uv", cov, se_uv, 0.0, not flat, math.sqrt(target_u * lam)),
    ]
    # split-half agreement of the second moment as a stationarity diagnostic
    h0, h1 = ens.halves
    d = h0["uu"][:, i] - h1["uu"][:, i]
    dm, dse = _stat(d)
    split_z = dm / dse if dse > 0 else 0.0
    return {
        "mode": k,
        "rows": rows,
        "split_half_z": split_z,
        "pass": all(r["pass"] for r in rows),
    }


def generator_consistency(cfg: SimConfig, f, x0, y0, sigmas=3.0, slope_range=(0.7, 1.3)) -> dict:
    """Short-horizon estimate of the generator against ``apply_L`` at ``(x0, y0)``.

    For ``h in (dt, 2 dt, 4 dt)`` the estimator is the ensemble mean of
    ``(f(X_h) - f(x0, y0) - CV_h) / h``. The control variate
    ``CV_h = <Df, N_h> + (<D^2 f N_h, N_h> - tr[D^2 f Cov N_h]) / 2`` uses the
    noise-driven linear response ``N_h`` of the scheme, whose covariance is
    known exactly, so it has mean zero. Passes when the ``h = dt`` estimate
    lies within ``2 |est(2dt) - est(dt)| + sigmas * se`` of the generator and
    the log-log slope of the error lies in ``slope_range``.
    """
    n = cfg.n_modes
    if cfg.steps < 4:
        raise InvalidArgumentError("steps: generator consistency needs at least 4 steps")
    if cfg.steps * cfg.dt > 0.1 + 1e-12:
        raise PreconditionError("generator consistency needs a short horizon: steps * dt <= 0.1")
    if f.dim != 2 * n:
        raise InvalidArgumentError(f"function dimension {f.dim} does not match phase dimension {2 * n}")
    x0 = np.asarray(x0, dtype=float).reshape(n)
    y0 = np.asarray(y0, dtype=float).reshape(n)
    run = SimConfig(n, cfg.dt, 4, cfg.ensemble, cfg.scheme, cfg.potential, cfg.seed, 0, 1,
                    tuple(x0), tuple(y0), cfg.workers)
    modes = mode_coefficients(n)
    step_data = _exact_step(modes, run.dt)
    sizes, seeds = _chunks(run)
    results = _map(run, lambda size, ss: _run_chunk(run, modes, step_data, ss, size, 1, 4, keep_noise=True),
                   list(zip(sizes, seeds)))
    states = np.concatenate([r[0] for r in results], axis=0)
    npath = [np.concatenate([r[3][j] for r in results], axis=0) for j in range(4)]
    covs = _noise_covariances(modes, step_data, run, 4)

    model = ops.dirichlet_identity(n)
    z0 = np.concatenate([x0, y0])
    target = float(ops.apply_L(model, cfg.potential, f, x0, y0))
    f0 = float(f.value(z0))
    grad = f.gradient(z0)
    hess = f.hessian(z0)
    rows = []
    for j in (1, 2, 4):
        h = j * run.dt
        nz = npath[j - 1]
        cv = nz @ grad + 0.5 * (np.einsum("ei,ij,ej->e", nz, hess, nz) - np.sum(hess * covs[j - 1]))
        samples = (f.value(states[:, j, :]) - f0 - cv) / h
        est, se = _stat(samples)
        rows.append({"h": h, "estimate": est, "se": se, "error": est - target})
    e1, e2 = rows[0]["estimate"], rows[1]["estimate"]
    band = 2.0 * abs(e2 - e1) + sigmas * rows[0]["se"]
    err = np.array([abs(r["error"]) for r in rows])
    hs = np.array([r["h"] for r in rows])
    if np.all(err > 0):
        slope = float(np.polyfit(np.log(hs), np.log(err), 1)[0])
    else:
        slope = float("nan")
    extrapolated = 2.0 * e1 - e2
    within = abs(e1 - target) <= band
    slope_ok = slope_range[0] <= slope <= slope_range[1]
    return {
        "function": f.label,
        "generator": target,
        "rows": rows,
        "band": band,
        "extrapolated": extrapolated,
        "extrapolated_error": extrapolated - target,
        "slope": slope,
        "within_band": bool(within),
        "slope_ok": bool(slope_ok),
        "pass": bool(within and slope_ok),
    }


def _noise_covariances(modes, step_data, cfg, steps):
    """Exact covariance (``2n x 2n``, phase ordering) of the noise response after each step."""
    n = modes.a.size
    F, reg, rest = step_data
    out = []
    sig = np.zeros((n, 2, 2))
    for _ in range(steps):
        for k in range(n):
            if cfg.scheme == "semi-implicit":
                inc = np.outer(reg[k], reg[k]) * cfg.dt + rest[k] @ rest[k].T
                sig[k] = F[k] @ sig[k] @ F[k].T + inc
            else:
                fe = np.eye(2) + cfg.dt * modes.blocks[k]
                sig[k] = fe @ sig[k] @ fe.T + cfg.dt * np.outer(modes.noise[k], modes.noise[k])
        full = np.zeros((2 * n, 2 * n))
        for k in range(n):
            idx = [k, n + k]
            full[np.ix_(idx, idx)] = sig[k]
        out.append(full)
    return out


def write_moment_csv(path, reports):
    """Per-mode moment summary rows from :func:`invariant_check` reports."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "quantity", "estimate", "se", "target", "z", "pass"])
        for rep in reports:
            for r in rep["rows"]:
                w.writerow([rep["mode"], r["quantity"], repr(r["estimate"]), repr(r["se"]), repr(r["target"]),
                            repr(r["z"]), str(r["pass"]).lower()])


def write_timeseries_csv(path, ens: TrajectoryEnsemble, k: int):
    """Plot-ready ``time, mean, variance, z`` of ``u_k`` with the exact transient variance as reference.

    The reference assumes a zero potential and a zero initial state.
    """
    i = k - 1
    a = (k * math.pi) ** 2
    u = ens.states[:, :, i]
    m = u.mean(axis=0)
    var = u.var(axis=0, ddof=1)
    e = u.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "mean", "variance", "z"])
        for t, mm, vv, col in zip(ens.times, m, var, u.T):
            ref = transient_covariance(a, t)[0, 0]
            fourth = np.mean((col - mm) ** 4)
            se = math.sqrt(max(fourth - vv**2, 0.0) / e) if e > 1 else float("inf")
            z = (vv - ref) / se if se > 0 else 0.0
            w.writerow([repr(float(t)), repr(float(mm)), repr(float(vv)), repr(float(z))])
