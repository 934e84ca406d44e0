"""Config-file driven command line front end.

``degenlab <command> <config.json>`` with command one of ``verify``,
``assemble``, ``simulate``, ``moreau``, ``spectrum``; ``degenlab summary
<reports.jsonl>`` rebuilds the CSV table from a report stream.

Exit codes: 0 when every check passes, 2 when a check fails, 1 on usage,
configuration or resource errors. The worker count is read from the
``DEGENLAB_WORKERS`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import functions as fns
from . import galerkin_ops as ops
from . import hermite_spectral as hs
from . import langevin_sim as sim
from . import potential as pot
from . import verify as ver
from .errors import DegenlabError, NumericalFailure, ResourceLimitError
from .gauss import ProjectedGaussian, spectrum_from_config

__all__ = ["main", "run", "report_summary", "SCHEMAS", "WORKERS_ENV"]

WORKERS_ENV = "DEGENLAB_WORKERS"

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class ConfigError(DegenlabError):
    pass


# --------------------------------------------------------------------------
# schemas
# --------------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 0}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}

_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "generator": {"enum": ["dirichlet-identity"]},
        "n": {"type": "integer", "minimum": 1},
        "q1": {"type": "array", "items": _POS},
        "q2": {"type": "array", "items": _POS},
        "c": _MATRIX,
        "k12": _MATRIX,
        "k21": _MATRIX,
        "k22": _MATRIX,
        "tau1": _POS,
        "tau2": _POS,
        "label": {"type": "string"},
    },
}

_SPECTRUM = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "eigenvalues": {"type": "array", "minItems": 1, "items": _POS},
        "generator": {"enum": ["dirichlet"]},
        "n": {"type": "integer", "minimum": 1},
        "basis_label": {"type": "string"},
    },
}

_POTENTIAL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["zero", "quadratic", "abs", "composite"]},
        "phi": {"enum": sorted(k for k in pot.PHI_LIBRARY if k != "linear")},
        "scale": _POS,
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "delta": _POS,
        "s_quad_points": {"type": "integer", "minimum": 2},
    },
}

_FUNCTION = {
    "type": "object",
    "properties": {
        "family": {"enum": ["constant", "linear", "polynomial", "hermite", "trig", "random_polynomial", "random_trig"]}
    },
    "required": ["family"],
}

_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
}

_CHECK = {
    "type": "object",
    "additionalProperties": False,
    "required": ["identity"],
    "properties": {
        "identity": {
            "enum": ["ibp", "dirichlet-form", "reg-N0", "reg-N", "reg-bound", "langevin", "invariance", "antisymmetry"]
        },
        "function": _FUNCTION,
        "function2": _FUNCTION,
        "alpha": _POS,
        "axis": _INT,
        "method": {"enum": ["quadrature", "mc"]},
        "budget": {"type": "integer", "minimum": 2},
        "potential": _POTENTIAL,
        "select": {"type": "array", "items": {"type": "string"}},
    },
}

_BASE = {
    "seed": {"type": "integer", "minimum": 0},
    "output": _OUTPUT,
}

SCHEMAS = {
    "verify": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            **_BASE,
            "model": _MODEL,
            "spectrum": _SPECTRUM,
            "potential": _POTENTIAL,
            "suite": {"enum": ["default", "none"]},
            "cases": {"type": "integer", "minimum": 1},
            "checks": {"type": "array", "items": _CHECK},
        },
    },
    "assemble": {
        "type": "object",
        "additionalProperties": False,
        "required": ["operator", "degree"],
        "properties": {
            **_BASE,
            "model": _MODEL,
            "potential": _POTENTIAL,
            "operator": {"enum": ["N0", "N", "S", "A", "L"]},
            "degree": {"type": "integer", "minimum": 0},
            "x_points": {"type": "integer", "minimum": 2},
            "grid_budget": {"type": "integer", "minimum": 1},
            "tolerance": _POS,
            "csv": {"type": "boolean"},
        },
    },
    "spectrum": {
        "type": "object",
        "additionalProperties": False,
        "required": ["operator", "degree"],
        "properties": {
            **_BASE,
            "model": _MODEL,
            "potential": _POTENTIAL,
            "operator": {"enum": ["N0", "N", "S", "A", "L"]},
            "degree": {"type": "integer", "minimum": 0},
            "x_points": {"type": "integer", "minimum": 2},
            "grid_budget": {"type": "integer", "minimum": 1},
            "tolerance": _POS,
            "alphas": {"type": "array", "items": _POS},
            "samples": {"type": "integer", "minimum": 1},
            "times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n_modes", "dt", "ensemble"],
        "properties": {
            **_BASE,
            "n_modes": {"type": "integer", "minimum": 1},
            "dt": _POS,
            "steps": {"type": "integer", "minimum": 1},
            "T": _POS,
            "ensemble": {"type": "integer", "minimum": 2},
            "scheme": {"enum": ["euler", "semi-implicit"]},
            "potential": _POTENTIAL,
            "burn_in": _INT,
            "record_every": {"type": "integer", "minimum": 1},
            "rel_tol": _POS,
            "generator_checks": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["function"],
                    "properties": {
                        "function": _FUNCTION,
                        "x0": {"type": "array", "items": _NUM},
                        "y0": {"type": "array", "items": _NUM},
                        "dt": _POS,
                        "ensemble": {"type": "integer", "minimum": 2},
                    },
                },
            },
        },
    },
    "moreau": {
        "type": "object",
        "additionalProperties": False,
        "required": ["potentials"],
        "properties": {
            **_BASE,
            "n": {"type": "integer", "minimum": 1},
            "potentials": {"type": "array", "minItems": 1, "items": _POTENTIAL},
            "t_grid": {"type": "array", "minItems": 2, "items": _POS},
            "points": {"type": "integer", "minimum": 1},
            "radius": _POS,
        },
    },
}


def _key_path(err):
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def load_config(command, path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_key_path(e)}: {e.message}")
    return cfg


def _workers():
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        w = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, w)


def _out_paths(cfg, command):
    out = cfg.get("output", {})
    d = Path(out.get("dir", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d, out.get("prefix", command)


def _write_reports(d, prefix, reports):
    (d / f"{prefix}.jsonl").write_text(ver.to_jsonl(reports))
    (d / f"{prefix}_summary.csv").write_text(ver.summary_csv(reports))


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------


def _default_checks(n, cases):
    comp = {"kind": "composite", "phi": "sqrt1p", "delta": 2}
    quad = {"kind": "quadratic"}
    checks = []
    for c in range(cases):
        s = 1000 + c
        checks += [
            {"identity": "ibp", "function": {"family": "random_trig", "seed": s},
             "function2": {"family": "random_trig", "seed": s + 500}, "axis": c % n, "budget": 20},
            {"identity": "ibp", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "function2": {"family": "random_trig", "seed": s + 500}, "axis": c % n, "potential": comp, "budget": 40},
            {"identity": "dirichlet-form", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "function2": {"family": "random_polynomial", "seed": s + 500, "degree": 3}, "potential": quad,
             "budget": 24},
            {"identity": "reg-N0", "function": {"family": "random_polynomial", "seed": s, "degree": 4},
             "alpha": [0.5, 1.0, 2.0][c % 3]},
            {"identity": "reg-N", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "alpha": 1.0, "potential": comp, "budget": 40},
            {"identity": "reg-bound", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "alpha": [0.5, 1.0, 2.0][c % 3], "potential": comp, "budget": 40},
            # the printed second-order forms omit the mixed term and fail for generic f
            {"identity": "langevin", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "alpha": 1.0, "select": ["langevin-first", "langevin-second-mixed", "langevin-square-mixed",
                                      "langevin-coercivity-lower", "langevin-coercivity-upper"]},
            {"identity": "invariance", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "potential": comp, "budget": 20},
            {"identity": "antisymmetry", "function": {"family": "random_polynomial", "seed": s, "degree": 3},
             "function2": {"family": "random_polynomial", "seed": s + 500, "degree": 3}, "potential": comp,
             "budget": 20},
        ]
    return checks


def _run_check(idx, chk, m, meas, default_pot, seed, workers):
    n = m.n
    ident = chk["identity"]
    phase = ident in ("langevin", "invariance", "antisymmetry")
    dim = 2 * n if phase else n
    key = f"checks.{idx}"
    try:
        f = fns.from_config(chk.get("function", {"family": "random_polynomial", "seed": seed + idx}), dim)
        g = fns.from_config(chk.get("function2", {"family": "random_polynomial", "seed": seed + idx + 1}), dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{key}.function: {exc}") from None
    pcfg = chk.get("potential", default_pot)
    p = pot.potential_from_config(pcfg, n) if pcfg else None
    method = chk.get("method", "quadrature")
    kw = dict(method=method, seed=seed + idx, workers=workers)
    if "budget" in chk:
        kw["budget"] = chk["budget"]
    alpha = chk.get("alpha", 1.0)
    if ident == "ibp":
        axis = chk.get("axis", 0)
        if axis >= n:
            raise ConfigError(f"{key}.axis: axis {axis} out of range for n={n}")
        out = [ver.verify_ibp(f, g, axis, meas, p, **kw)]
    elif ident == "dirichlet-form":
        out = [ver.verify_dirichlet_form(f, g, m, p, **kw)]
    elif ident == "reg-N0":
        out = ver.verify_reg_N0(f, alpha, m, **kw)
    elif ident == "reg-N":
        out = ver.verify_reg_N(f, alpha, m, p, **kw)
    elif ident == "reg-bound":
        out = ver.verify_reg_bound(f, alpha, m, p, **kw)
    elif ident == "langevin":
        out = ver.verify_langevin(f, alpha, m, **kw)
    elif ident == "invariance":
        out = [ver.verify_invariance(f, m, p, **kw)]
    else:
        out = [ver.verify_antisymmetry(f, g, m, p, **kw)]
    if "select" in chk:
        out = [r for r in out if r.identity_tag in chk["select"]]
    return out


def _model(cfg):
    return ops.model_from_config(cfg.get("model", {"generator": "dirichlet-identity", "n": 2}))


def cmd_verify(cfg):
    workers = _workers()
    m = _model(cfg)
    if "spectrum" in cfg:
        spec = spectrum_from_config(cfg["spectrum"])
        if len(spec) < m.n:
            raise ConfigError(f"spectrum.eigenvalues: need at least {m.n} eigenvalues")
        meas = ProjectedGaussian(np.array(spec.eigenvalues[: m.n]))
    else:
        meas = m.position_measure()
    checks = list(cfg.get("checks", []))
    if cfg.get("suite", "default" if not checks else "none") == "default":
        checks = _default_checks(m.n, cfg.get("cases", 3)) + checks
    seed = cfg.get("seed", 0)
    tasks = list(enumerate(checks))
    default_pot = cfg.get("potential")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _run_check(t[0], t[1], m, meas, default_pot, seed, 1), tasks))
    else:
        results = [_run_check(i, c, m, meas, default_pot, seed, 1) for i, c in tasks]
    reports = [r for rs in results for r in rs]
    d, prefix = _out_paths(cfg, "verify")
    _write_reports(d, prefix, reports)
    failed = sum(not r.passed for r in reports)
    print(f"verify: {len(reports) - failed}/{len(reports)} checks passed; reports in {d / (prefix + '.jsonl')}")
    return EXIT_OK if failed == 0 else EXIT_FAIL


# --------------------------------------------------------------------------
# assemble / spectrum
# --------------------------------------------------------------------------


def _assemble_from(cfg):
    m = _model(cfg)
    op = cfg["operator"]
    p = pot.potential_from_config(cfg["potential"], m.n) if "potential" in cfg else None
    basis = hs.HermiteBasis.for_model(m, cfg["degree"], phase=op not in ("N0", "N"))
    if basis.size > hs.MAX_DENSE:
        raise ResourceLimitError(
            f"degree: basis of {basis.size} functions exceeds the dense limit {hs.MAX_DENSE}"
        )
    kw = {}
    if "grid_budget" in cfg:
        kw["budget"] = cfg["grid_budget"]
    if "x_points" in cfg:
        kw["x_points"] = cfg["x_points"]
    return m, hs.assemble(op, m, p, basis, **kw)


def cmd_assemble(cfg):
    m, M = _assemble_from(cfg)
    tol = cfg.get("tolerance", 1e-9)
    rep = hs.check_dissipativity(M, tol)
    d, prefix = _out_paths(cfg, "assemble")
    M.save_npy(d / f"{prefix}_{M.operator_tag}.npy")
    np.save(d / f"{prefix}_{M.operator_tag}_gram.npy", M.gram)
    if cfg.get("csv", False):
        M.save_csv(d / f"{prefix}_{M.operator_tag}.csv")
    record = {k: rep[k] for k in ("operator_tag", "n", "degree", "max_sym_eig", "pass")}
    record["basis_size"] = M.basis.size
    record["assembly_quadrature"] = M.assembly_quadrature
    (d / f"{prefix}.jsonl").write_text(json.dumps(record, sort_keys=True) + "\n")
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_spectrum(cfg):
    m, M = _assemble_from(cfg)
    tol = cfg.get("tolerance", 1e-9)
    rng = np.random.default_rng(cfg.get("seed", 0))
    d, prefix = _out_paths(cfg, "spectrum")
    a = np.asarray(M.entries)
    if M.weighted:
        import scipy.linalg

        eig = scipy.linalg.eigvals(a, M.gram)
    else:
        eig = np.linalg.eigvals(a)
    order = np.lexsort((eig.imag, -eig.real))
    eig = eig[order]
    np.save(d / f"{prefix}_eigenvalues.npy", eig)
    with open(d / f"{prefix}_eigenvalues.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["real", "imag"])
        for z in eig:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])
    records = []
    diss = hs.check_dissipativity(M, tol)
    records.append({"check": "dissipativity", **diss})
    worst = 0.0
    for alpha in cfg.get("alphas", [0.5, 1.0, 2.0]):
        for _ in range(cfg.get("samples", 20)):
            g = rng.standard_normal(M.basis.size)
            f = hs.resolvent_solve(M, alpha, g)
            worst = max(worst, alpha * hs.weighted_norm(M, f) / hs.weighted_norm(M, g) - 1.0)
    records.append({"check": "resolvent-contraction", "operator_tag": M.operator_tag, "n": M.n,
                    "degree": M.basis.max_total_degree, "max_excess": worst, "tolerance": 1e-10,
                    "pass": bool(worst <= 1e-10)})
    f0 = rng.standard_normal(M.basis.size)
    norms = [hs.weighted_norm(M, hs.semigroup_apply(M, t, f0)) for t in cfg.get("times", [0, 0.5, 1, 2, 4])]
    mono = all(b <= a_ * (1 + 1e-10) for a_, b in zip(norms, norms[1:]))
    records.append({"check": "semigroup-contraction", "operator_tag": M.operator_tag, "n": M.n,
                    "degree": M.basis.max_total_degree, "norms": norms, "pass": bool(mono)})
    (d / f"{prefix}.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    ok = all(r["pass"] for r in records)
    print(f"spectrum: {sum(r['pass'] for r in records)}/{len(records)} checks passed; "
          f"top eigenvalue real part {eig.real.max():.3e}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(cfg):
    workers = _workers()
    n = cfg["n_modes"]
    dt = cfg["dt"]
    if "steps" in cfg:
        steps = cfg["steps"]
    elif "T" in cfg:
        steps = int(round(cfg["T"] / dt))
    else:
        raise ConfigError("steps: give either 'steps' or 'T'")
    p = pot.potential_from_config(cfg["potential"], n) if "potential" in cfg else None
    seed = cfg.get("seed", 0)
    try:
        sc = sim.SimConfig(n, dt, steps, cfg["ensemble"], cfg.get("scheme", "semi-implicit"), p, seed,
                           cfg.get("burn_in"), cfg.get("record_every"), workers=workers)
    except DegenlabError as exc:
        raise ConfigError(str(exc)) from None
    ens = sim.simulate(sc)
    d, prefix = _out_paths(cfg, "simulate")
    ens.save_npy(d / f"{prefix}_states.npy")
    np.save(d / f"{prefix}_times.npy", ens.times)
    reps = [sim.invariant_check(ens, k, rel_tol=cfg.get("rel_tol", 0.05)) for k in range(1, n + 1)]
    sim.write_moment_csv(d / f"{prefix}_moments.csv", reps)
    for k in range(1, n + 1):
        sim.write_timeseries_csv(d / f"{prefix}_mode{k}_timeseries.csv", ens, k)
    lines = [json.dumps({"check": "invariant", **r}, sort_keys=True) for r in reps]
    ok = all(r["pass"] for r in reps)
    for i, gc in enumerate(cfg.get("generator_checks", [])):
        f = fns.from_config(gc["function"], 2 * n)
        gdt = gc.get("dt", dt)
        gcfg = sim.SimConfig(n, gdt, 4, gc.get("ensemble", cfg["ensemble"]), sc.scheme, p, seed + 1 + i,
                             workers=workers)
        r = sim.generator_consistency(gcfg, f, gc.get("x0", [0.0] * n), gc.get("y0", [0.0] * n))
        lines.append(json.dumps({"check": "generator", **r}, sort_keys=True))
        ok = ok and r["pass"]
    (d / f"{prefix}.jsonl").write_text("".join(line + "\n" for line in lines))
    print(f"simulate: {'all checks passed' if ok else 'some checks failed'}; outputs in {d}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# moreau
# --------------------------------------------------------------------------


def moreau_checks(p, t_grid, points, tol=1e-9):
    """Envelope properties on a point set; returns a list of report dicts.

    Checks lower bound <= envelope <= potential, monotone convergence of the
    envelope as ``t`` decreases, gradient domination, and monotone gradient
    convergence with final error at most ``0.01 max(1, |D Phi|)``.
    """
    t_grid = sorted(t_grid, reverse=True)
    vals = np.empty((len(t_grid), len(points)))
    grads = np.empty((len(t_grid), len(points), p.dim))
    for a, t in enumerate(t_grid):
        for b, u in enumerate(points):
            v, g, _ = pot.moreau_yoshida(p, t, u)
            vals[a, b] = v
            grads[a, b] = g
    phi = p.value(points)
    dphi = p.gradient(points)
    lb = p.lower_bound if p.lower_bound is not None else -math.inf
    item1 = bool(np.all(vals >= lb - tol) and np.all(vals <= phi + tol))
    item2 = bool(np.all(np.diff(vals, axis=0) >= -tol))
    gn = np.linalg.norm(grads, axis=-1)
    item3 = bool(np.all(gn <= np.linalg.norm(dphi, axis=-1) * (1 + tol) + tol))
    err = np.linalg.norm(grads - dphi, axis=-1)
    scale = np.maximum(1.0, np.linalg.norm(dphi, axis=-1))
    item4 = bool(np.all(np.diff(err, axis=0) <= tol * scale) and np.all(err[-1] <= 0.01 * scale))
    base = {"potential": p.label, "n": p.dim, "points": len(points), "t_grid": t_grid}
    return [
        {**base, "item": 1, "property": "lower bound <= envelope <= potential", "pass": item1},
        {**base, "item": 2, "property": "envelope increases to the potential as t decreases", "pass": item2,
         "max_gap_at_smallest_t": float(np.max(phi - vals[-1]))},
        {**base, "item": 3, "property": "envelope gradient dominated by potential gradient", "pass": item3},
        {**base, "item": 4, "property": "envelope gradient converges monotonically", "pass": item4,
         "final_error": float(np.max(err[-1] / scale))},
    ]


def moreau_grid(n, points, radius, seed):
    """Points avoiding the coordinate hyperplanes where non-smooth potentials kink."""
    if n == 1:
        g = np.linspace(-radius, radius, points + 1)
        g = g[np.abs(g) > 1e-9]
        return g[:points].reshape(-1, 1) + 0.5 * radius / points
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-radius, radius, size=(points, n))
    return np.where(np.abs(pts) < 0.05, np.sign(pts) * 0.05 + pts, pts)


def cmd_moreau(cfg):
    n = cfg.get("n", 1)
    pts = moreau_grid(n, cfg.get("points", 100), cfg.get("radius", 2.0), cfg.get("seed", 0))
    records = []
    for pc in cfg["potentials"]:
        p = pot.potential_from_config(pc, n)
        try:
            records += moreau_checks(p, cfg.get("t_grid", [1.0, 0.1, 0.01, 0.001]), pts)
        except NumericalFailure as exc:
            records.append({"potential": p.label, "item": "solver", "pass": False, "residual": exc.residual})
    d, prefix = _out_paths(cfg, "moreau")
    (d / f"{prefix}.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    ok = all(r["pass"] for r in records)
    print(f"moreau: {sum(r['pass'] for r in records)}/{len(records)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# summary
# --------------------------------------------------------------------------


def report_summary(lines):
    """CSV table from a JSON-lines report stream.

    Returns ``(csv_text, exit_code)``. Malformed lines become ``error`` rows
    and force a nonzero exit code.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ver.SUMMARY_COLUMNS)
    total = passed = bad = 0
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            row = [r["identity_tag"], r.get("n", ""), r.get("degree", ""), repr(float(r["abs_err"])),
                   repr(float(r["tolerance"])), str(bool(r["pass"])).lower()]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            w.writerow(["error", "", "", "", "", f"line {lineno}: {type(exc).__name__}"])
            bad += 1
            continue
        w.writerow(row)
        total += 1
        passed += row[-1] == "true"
    if total or bad:
        w.writerow(["pass-rate", "", "", "", "", f"{passed}/{total}"])
    code = EXIT_USAGE if bad else (EXIT_OK if passed == total else EXIT_FAIL)
    return buf.getvalue(), code


def cmd_summary(path):
    try:
        with open(path) as fh:
            text, code = report_summary(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read report stream {path}: {exc}") from None
    sys.stdout.write(text)
    return code


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------

_COMMANDS = {
    "verify": cmd_verify,
    "assemble": cmd_assemble,
    "simulate": cmd_simulate,
    "moreau": cmd_moreau,
    "spectrum": cmd_spectrum,
}


def run(command, path):
    """Run one command on a config file; returns the exit code."""
    try:
        if command == "summary":
            return cmd_summary(path)
        cfg = load_config(command, path)
        return _COMMANDS[command](cfg)
    except ResourceLimitError as exc:
        print(f"degenlab {command}: resource limit: {exc}", file=sys.stderr)
    except (ConfigError, DegenlabError) as exc:
        print(f"degenlab {command}: {exc}", file=sys.stderr)
    return EXIT_USAGE


def main(argv=None):
    parser = argparse.ArgumentParser(prog="degenlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(_COMMANDS) + ["summary"])
    parser.add_argument("config", help="JSON config file (report stream for 'summary')")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return run(args.command, args.config)


if __name__ == "__main__":
    sys.exit(main())
