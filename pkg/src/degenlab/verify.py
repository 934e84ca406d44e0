"""Numerical certificates for the integral identities and inequalities.

Every verifier builds pointwise integrands, integrates them on a tensor
Gauss-Hermite rule (or by Monte Carlo) under the Gaussian measure, reweighted
by ``exp(-Phi)`` when a potential is given, and returns
:class:`IdentityReport` records.

Default tolerances: ``1e-9`` for exactly integrated polynomial cases,
``1e-6`` when a potential makes the integrand non-polynomial, ``3``
standard errors for Monte Carlo, and ``1e-10`` slack for inequalities.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import galerkin_ops as ops
from .errors import InvalidArgumentError, PreconditionError, UnsupportedError
from .gauss import ProjectedGaussian, quadrature, reweight, sample

__all__ = [
    "IdentityReport",
    "TOL_EXACT",
    "TOL_WEIGHTED",
    "TOL_SLACK",
    "MC_SIGMAS",
    "verify_ibp",
    "verify_dirichlet_form",
    "verify_reg_N0",
    "verify_reg_N",
    "verify_reg_bound",
    "verify_langevin",
    "verify_invariance",
    "verify_antisymmetry",
    "to_jsonl",
    "summary_csv",
]

TOL_EXACT = 1e-9
TOL_WEIGHTED = 1e-6
TOL_SLACK = 1e-10
MC_SIGMAS = 3.0


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one identity (``kind="equality"``) or one-sided bound (``kind="inequality"``).

    For inequalities ``lhs <= rhs`` is claimed, ``abs_err = max(0, lhs - rhs)``
    and ``slack = rhs - lhs``.
    """

    identity_tag: str
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    method: str
    budget: int
    tolerance: float
    passed: bool
    inputs_digest: str
    kind: str = "equality"
    slack: float = 0.0
    n: int = 0
    degree: int = -1
    error_estimate: float = 0.0
    terms: dict = field(default_factory=dict)

    @property
    def pass_(self):
        return self.passed

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _digest(**parts):
    blob = json.dumps(parts, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, ops.GalerkinModel):
        return obj.to_dict()
    return getattr(obj, "label", repr(obj))


def _degree_of(f):
    deg = getattr(f.value, "degree", None)
    return int(deg) if deg is not None else -1


# --------------------------------------------------------------------------
# integration backend
# --------------------------------------------------------------------------


class _Rule:
    """Nodes with self-normalized weights; a coarser level for quadrature error."""

    def __init__(self, measure, potential, method, budget, seed, workers=None):
        self.method = method
        self.potential = None if potential is None or potential.is_zero else potential
        if self.potential is not None and self.potential.lower_bound is None:
            raise PreconditionError("potential must carry a lower bound to define the reweighted measure")
        if method == "quadrature":
            self.budget = int(budget)
            self.levels = [self._quad(measure, self.budget)]
            if self.potential is not None:
                self.levels.append(self._quad(measure, self.budget - 1))
        elif method == "mc":
            self.budget = int(budget)
            pts = sample(measure, self.budget, seed, workers)
            w = np.full(self.budget, 1.0 / self.budget)
            self.levels = [(pts, self._weights(pts, w))]
        else:
            raise InvalidArgumentError(f"method must be 'quadrature' or 'mc', got {method!r}")

    def _weights(self, nodes, w):
        if self.potential is None:
            return w
        return reweight(w, self.potential.value(nodes[:, : self.potential.dim]))

    def _quad(self, measure, pts):
        rule = quadrature(measure, pts)
        return rule.nodes, self._weights(rule.nodes, rule.weights)

    @property
    def nodes(self):
        return self.levels[0][0]


def _finish(tag, kind, rule, lhs_fn, rhs_fn, tol, digest, n, degree, term_fns):
    """Integrate on every level and build the report."""
    vals = []
    for nodes, w in rule.levels:
        lv = np.asarray(lhs_fn(nodes), dtype=float)
        rv = np.asarray(rhs_fn(nodes), dtype=float)
        vals.append((float(w @ lv), float(w @ rv), lv - rv, w))
    lhs, rhs, resid, w = vals[0]
    terms = {}
    for name, fn in term_fns.items():
        terms[name] = float(w @ np.asarray(fn(rule.nodes), dtype=float))
    scale = max([abs(lhs), abs(rhs)] + [abs(v) for v in terms.values()])

    if rule.method == "mc":
        mean = float(w @ resid)
        se = float(math.sqrt(np.sum((w * (resid - mean)) ** 2)))
        err_est = se
        tol = MC_SIGMAS * se if tol is None else tol
    else:
        err_est = 0.0
        if len(vals) > 1:
            err_est = abs((vals[0][0] - vals[0][1]) - (vals[1][0] - vals[1][1]))
    # integrating the pointwise difference cancels before the totals are rounded
    diff = math.fsum(w * resid)
    if kind == "equality":
        abs_err = abs(diff)
        slack = 0.0
    else:
        abs_err = max(0.0, diff)
        slack = -diff
    rel_err = abs_err / scale if scale > 0.0 else 0.0
    return IdentityReport(
        identity_tag=tag,
        lhs=lhs,
        rhs=rhs,
        abs_err=abs_err,
        rel_err=rel_err,
        method=rule.method,
        budget=rule.budget,
        tolerance=float(tol),
        passed=bool(abs_err <= tol or rel_err <= tol),
        inputs_digest=digest,
        kind=kind,
        slack=slack,
        n=n,
        degree=degree,
        error_estimate=float(err_est),
        terms=terms,
    )


def _default_tol(rule, tol):
    if tol is not None:
        return tol
    if rule.method == "mc":
        return None
    return TOL_EXACT if rule.potential is None else TOL_WEIGHTED


# --------------------------------------------------------------------------
# position-space identities
# --------------------------------------------------------------------------


def verify_ibp(f, g, i, gmeas: ProjectedGaussian, p=None, method="quadrature", budget=20, seed=0,
               tol=None, workers=None) -> IdentityReport:
    """Gaussian integration by parts along axis ``i``.

    ``int d_i f g + f d_i g = int (x_i / lambda_i + d_i Phi) f g`` under the
    (reweighted) measure.
    """
    n = gmeas.dim
    if not 0 <= i < n:
        raise InvalidArgumentError(f"axis {i} out of range for dimension {n}")
    if f.dim != n or g.dim != n:
        raise InvalidArgumentError("function dimensions must match the measure")
    rule = _Rule(gmeas, p, method, budget, seed, workers)
    lam = gmeas.variances[i]

    def lhs(z):
        return f.gradient(z)[:, i] * g.value(z) + f.value(z) * g.gradient(z)[:, i]

    def rhs(z):
        drift = z[:, i] / lam
        if rule.potential is not None:
            drift = drift + rule.potential.gradient(z)[:, i]
        return drift * f.value(z) * g.value(z)

    digest = _digest(tag="ibp", f=f.label, g=g.label, i=i, var=gmeas.variances, p=p, m=method, b=budget, s=seed)
    return _finish("ibp", "equality", rule, lhs, rhs, _default_tol(rule, tol), digest, n,
                   max(_degree_of(f), _degree_of(g)), {})


def _rule_for_model(m, p, method, budget, seed, workers, phase=False):
    meas = m.phase_measure() if phase else m.position_measure()
    return _Rule(meas, p, method, budget, seed, workers)


def verify_dirichlet_form(f, g, m: ops.GalerkinModel, p=None, alpha_unused=None, method="quadrature",
                          budget=16, seed=0, tol=None, workers=None) -> IdentityReport:
    """``int (N f) g = -int <c Df, Dg>`` under the reweighted measure."""
    rule = _rule_for_model(m, p, method, budget, seed, workers)

    def lhs(z):
        return ops.apply_N(m, p, f, z) * g.value(z)

    def rhs(z):
        return -np.sum((f.gradient(z) @ m.c.T) * g.gradient(z), axis=-1)

    digest = _digest(tag="dirichlet-form", f=f.label, g=g.label, m=m, p=p, me=method, b=budget, s=seed)
    return _finish("dirichlet-form", "equality", rule, lhs, rhs, _default_tol(rule, tol), digest, m.n,
                   max(_degree_of(f), _degree_of(g)), {})


def _position_terms(m, p, f, alpha, z):
    """Pointwise integrands shared by the position-space regularity checks."""
    df = f.gradient(z)
    h = f.hessian(z)
    cdf = df @ m.c.T
    ch = np.einsum("ij,...jk->...ik", m.c, h)
    nf = ops.apply_N(m, p, f, z)
    g = alpha * f.value(z) - nf
    dg = alpha * df - ops.grad_N(m, p, f, z)
    t = {
        "f2": f.value(z) ** 2,
        "cdf_df": np.sum(cdf * df, axis=-1),
        "q1_cdf": np.sum(cdf * cdf * m.q1_inv, axis=-1),
        "cdf_sq": np.sum(cdf * cdf, axis=-1),
        "tr_chch": np.einsum("...ij,...ji->...", ch, ch),
        "dg_cdf": np.sum(dg * cdf, axis=-1),
        "gf": g * f.value(z),
        "g2": g * g,
        "nf2": nf * nf,
    }
    pot = None if p is None or p.is_zero else p
    if pot is not None:
        t["hess_phi"] = np.einsum("...i,...ij,...j->...", cdf, pot.hessian(z), cdf)
    else:
        t["hess_phi"] = np.zeros_like(t["f2"])
    return t


class _TermCache:
    """Evaluates the shared integrands once per node set."""

    def __init__(self, fn):
        self.fn = fn
        self._key = None
        self._val = None

    def __call__(self, z):
        if self._key is None or self._key is not z:
            self._key = z
            self._val = self.fn(z)
        return self._val

    def term(self, *names, sign=None):
        sign = sign or [1.0] * len(names)

        def get(z):
            t = self(z)
            return sum(s * t[k] for s, k in zip(sign, names))

        return get


def _position_reports(tags, m, p, f, alpha, method, budget, seed, tol, workers, hessian_term):
    rule = _rule_for_model(m, p, method, budget, seed, workers)
    cache = _TermCache(lambda z: _position_terms(m, p, f, alpha, z))
    tol = _default_tol(rule, tol)
    deg = _degree_of(f)
    base = dict(f=f.label, alpha=alpha, m=m, p=p, me=method, b=budget, s=seed)
    second_lhs = ["cdf_df", "q1_cdf", "tr_chch"] + (["hess_phi"] if hessian_term else [])
    second_sign = [alpha, 1.0, 1.0] + ([1.0] if hessian_term else [])
    part_lhs = ["q1_cdf", "tr_chch"] + (["hess_phi"] if hessian_term else [])
    out = [
        _finish(tags[0], "equality", rule, cache.term("f2", "cdf_df", sign=[alpha, 1.0]), cache.term("gf"),
                tol, _digest(tag=tags[0], **base), m.n, deg,
                {"alpha_f2": cache.term("f2", sign=[alpha]), "cdf_df": cache.term("cdf_df")}),
        _finish(tags[1], "equality", rule, cache.term(*second_lhs, sign=second_sign), cache.term("dg_cdf"),
                tol, _digest(tag=tags[1], **base), m.n, deg,
                {k: cache.term(k, sign=[s]) for k, s in zip(second_lhs, second_sign)}),
        _finish(tags[2], "equality", rule, cache.term(*part_lhs), cache.term("nf2"),
                tol, _digest(tag=tags[2], **base), m.n, deg, {k: cache.term(k) for k in part_lhs}),
    ]
    return rule, cache, out


def verify_reg_N0(f, alpha, m: ops.GalerkinModel, method="quadrature", budget=12, seed=0, tol=None,
                  workers=None) -> list:
    """Regularity identities for ``g = alpha f - N0 f`` and the coercivity bound.

    Returns four reports: the first-order identity, the second-order
    identity, the identity against ``int (N0 f)^2``, and
    ``int |c Df|^2 / lambda_1 <= int |q1^{-1/2} c Df|^2``.
    """
    if alpha <= 0.0:
        raise InvalidArgumentError("alpha must be positive")
    tags = ("reg-N0-first", "reg-N0-second", "reg-N0-square")
    rule, cache, out = _position_reports(tags, m, None, f, alpha, method, budget, seed, tol, workers, False)
    lam1 = float(m.q1.max())
    out.append(
        _finish("coercivity-N0", "inequality", rule, cache.term("cdf_sq", sign=[1.0 / lam1]), cache.term("q1_cdf"),
                TOL_SLACK if tol is None or method != "mc" else tol,
                _digest(tag="coercivity-N0", f=f.label, m=m, me=method, b=budget, s=seed), m.n, _degree_of(f), {})
    )
    return out


def verify_reg_N(f, alpha, m: ops.GalerkinModel, p, method="quadrature", budget=40, seed=0, tol=None,
                 workers=None) -> list:
    """Regularity identities for ``g = alpha f - N f`` including the Hessian of ``Phi``."""
    if alpha <= 0.0:
        raise InvalidArgumentError("alpha must be positive")
    if p is not None and not p.is_zero and p.hessian is None:
        raise PreconditionError("potential must provide a Hessian for the second-order identity")
    tags = ("reg-N-first", "reg-N-second", "reg-N-square")
    _, _, out = _position_reports(tags, m, p, f, alpha, method, budget, seed, tol, workers, True)
    return out


def verify_reg_bound(f, alpha, m: ops.GalerkinModel, p, method="quadrature", budget=40, seed=0, tol=TOL_SLACK,
                     workers=None) -> list:
    """One-sided bounds for convex ``Phi``.

    ``int alpha f^2 + <c Df, Df> <= int g^2 / alpha`` and
    ``int tr[(c D^2 f)^2] + |q1^{-1/2} c Df|^2 <= 4 int g^2``.
    """
    if p is not None and not p.convex:
        raise UnsupportedError("the bounds are only established for convex potentials")
    if alpha <= 0.0:
        raise InvalidArgumentError("alpha must be positive")
    rule = _rule_for_model(m, p, method, budget, seed, workers)
    cache = _TermCache(lambda z: _position_terms(m, p, f, alpha, z))
    base = dict(f=f.label, alpha=alpha, m=m, p=p, me=method, b=budget, s=seed)
    deg = _degree_of(f)
    return [
        _finish("reg-bound-first", "inequality", rule, cache.term("f2", "cdf_df", sign=[alpha, 1.0]),
                cache.term("g2", sign=[1.0 / alpha]), tol, _digest(tag="reg-bound-first", **base), m.n, deg, {}),
        _finish("reg-bound-second", "inequality", rule, cache.term("tr_chch", "q1_cdf"),
                cache.term("g2", sign=[4.0]), tol, _digest(tag="reg-bound-second", **base), m.n, deg, {}),
    ]


# --------------------------------------------------------------------------
# phase-space identities
# --------------------------------------------------------------------------


def _langevin_terms(m, f, alpha, z):
    n = m.n
    x, y = z[:, :n], z[:, n:]
    df = f.gradient(z)
    dx, dy = df[:, :n], df[:, n:]
    hyy = f.hessian(z)[:, n:, n:]
    lf = ops.apply_L(m, None, f, x, y)
    g = alpha * f.value(z) - lf
    dg = alpha * df - ops.grad_L(m, None, f, x, y)
    dgx, dgy = dg[:, :n], dg[:, n:]
    k22dy = dy @ m.k22.T
    k21dy = dy @ m.k21.T
    k12dx = dx @ m.k12.T
    kh = np.einsum("ij,...jk->...ik", m.k22, hyy)
    mix = k22dy - k12dx
    # A applied to each velocity derivative of f, paired with k12 D_x f
    h = f.hessian(z)
    a_dy = np.stack([ops.a_kernel(m, x, y, h[:, :n, n + i], h[:, n:, n + i]) for i in range(n)], axis=-1)
    return {
        "mixed": -2.0 * np.sum(a_dy * k12dx, axis=-1),
        "f2": f.value(z) ** 2,
        "k22_dy": np.sum(k22dy * dy, axis=-1),
        "fg": f.value(z) * g,
        "q1_k21dy": np.sum(k21dy * k21dy * m.q1_inv, axis=-1),
        "k21dy_sq": np.sum(k21dy * k21dy, axis=-1),
        "q2_mix": np.sum(mix * mix * m.q2_inv, axis=-1),
        "tr_khkh": np.einsum("...ij,...ji->...", kh, kh),
        "rhs_second": np.sum(k22dy * dgy, axis=-1) - np.sum(k12dx * dgy, axis=-1) + np.sum(k21dy * dgx, axis=-1),
        "lf2": lf * lf,
    }


def verify_langevin(f, alpha, m: ops.GalerkinModel, method="quadrature", budget=10, seed=0, tol=None,
                    workers=None) -> list:
    """Regularity relations of the unperturbed Langevin operator.

    Returns seven reports: the first-order identity, the second-order
    identity, the identity against ``int (L f)^2``, the two-sided chain
    ``int |k21 D_y f|^2 / nu_1 + tr <= int |q1^{-1/2} k21 D_y f|^2 + tr <= int (L f)^2``
    as two inequalities (``nu_1`` is the largest velocity variance), and the
    second-order and square identities completed by the mixed term
    ``-2 sum_ij (k12)_ij int A(d_{y_i} f) d_{x_j} f``.

    The mixed term vanishes when ``f`` depends on ``x`` only or on ``y``
    only, but not in general: for ``n = 1``, unit coefficients and
    ``f = x y`` it equals ``2``, and the uncompleted identities fail.
    """
    if alpha <= 0.0:
        raise InvalidArgumentError("alpha must be positive")
    if f.dim != 2 * m.n:
        raise InvalidArgumentError(f"function dimension {f.dim} does not match phase dimension {2 * m.n}")
    rule = _rule_for_model(m, None, method, budget, seed, workers, phase=True)
    cache = _TermCache(lambda z: _langevin_terms(m, f, alpha, z))
    tol_eq = _default_tol(rule, tol)
    tol_in = TOL_SLACK if rule.method != "mc" else tol
    base = dict(f=f.label, alpha=alpha, m=m, me=method, b=budget, s=seed)
    deg = _degree_of(f)
    nu1 = float(m.q2.max())
    second = ["k22_dy", "q1_k21dy", "q2_mix", "tr_khkh"]
    second_sign = [alpha, 1.0, 1.0, 1.0]
    part = second[1:]
    return [
        _finish("langevin-first", "equality", rule, cache.term("f2", "k22_dy", sign=[alpha, 1.0]), cache.term("fg"),
                tol_eq, _digest(tag="langevin-first", **base), m.n, deg, {}),
        _finish("langevin-second", "equality", rule, cache.term(*second, sign=second_sign),
                cache.term("rhs_second"), tol_eq, _digest(tag="langevin-second", **base), m.n, deg,
                {k: cache.term(k, sign=[s]) for k, s in zip(second, second_sign)}),
        _finish("langevin-square", "equality", rule, cache.term(*part), cache.term("lf2"), tol_eq,
                _digest(tag="langevin-square", **base), m.n, deg, {k: cache.term(k) for k in part}),
        _finish("langevin-coercivity-lower", "inequality", rule,
                cache.term("k21dy_sq", "tr_khkh", sign=[1.0 / nu1, 1.0]), cache.term("q1_k21dy", "tr_khkh"),
                tol_in, _digest(tag="langevin-coercivity-lower", **base), m.n, deg, {}),
        _finish("langevin-coercivity-upper", "inequality", rule, cache.term("q1_k21dy", "tr_khkh"),
                cache.term("lf2"), tol_in, _digest(tag="langevin-coercivity-upper", **base), m.n, deg, {}),
        _finish("langevin-second-mixed", "equality", rule, cache.term(*second, "mixed", sign=second_sign + [1.0]),
                cache.term("rhs_second"), tol_eq, _digest(tag="langevin-second-mixed", **base), m.n, deg,
                {"mixed": cache.term("mixed")}),
        _finish("langevin-square-mixed", "equality", rule, cache.term(*part, "mixed"), cache.term("lf2"), tol_eq,
                _digest(tag="langevin-square-mixed", **base), m.n, deg, {"mixed": cache.term("mixed")}),
    ]


def verify_invariance(f, m: ops.GalerkinModel, p=None, method="quadrature", budget=10, seed=0, tol=None,
                      workers=None) -> IdentityReport:
    """``int L_Phi f`` against the invariant measure ``rho_Phi mu_1 x mu_2``."""
    n = m.n
    rule = _rule_for_model(m, p, method, budget, seed, workers, phase=True)

    def lhs(z):
        return ops.apply_L(m, p, f, z[:, :n], z[:, n:])

    def scale(z):
        return np.abs(lhs(z))

    digest = _digest(tag="invariance", f=f.label, m=m, p=p, me=method, b=budget, s=seed)
    return _finish("invariance", "equality", rule, lhs, lambda z: np.zeros(len(z)), _default_tol(rule, tol), digest,
                   n, _degree_of(f), {"abs_Lf": scale})


def verify_antisymmetry(f, g, m: ops.GalerkinModel, p=None, method="quadrature", budget=10, seed=0, tol=None,
                        workers=None) -> IdentityReport:
    """``int (A f) g + f (A g) = 0`` under ``rho_Phi mu_1 x mu_2``."""
    n = m.n
    rule = _rule_for_model(m, p, method, budget, seed, workers, phase=True)

    def parts(z):
        x, y = z[:, :n], z[:, n:]
        return ops.apply_A(m, p, f, x, y) * g.value(z), f.value(z) * ops.apply_A(m, p, g, x, y)

    digest = _digest(tag="antisymmetry", f=f.label, g=g.label, m=m, p=p, me=method, b=budget, s=seed)
    return _finish("antisymmetry", "equality", rule, lambda z: sum(parts(z)), lambda z: np.zeros(len(z)),
                   _default_tol(rule, tol), digest, n, max(_degree_of(f), _degree_of(g)),
                   {"Af_g": lambda z: parts(z)[0], "f_Ag": lambda z: parts(z)[1]})


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

SUMMARY_COLUMNS = ("identity_tag", "n", "degree", "residual", "tolerance", "pass")


def to_jsonl(reports) -> str:
    return "".join(r.to_json() + "\n" for r in reports)


def summary_csv(reports) -> str:
    """CSV with one row per report and a pass-rate footer."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    passed = 0
    reports = list(reports)
    for r in reports:
        w.writerow([r.identity_tag, r.n, r.degree, repr(r.abs_err), repr(r.tolerance), str(r.passed).lower()])
        passed += bool(r.passed)
    if reports:
        w.writerow(["pass-rate", "", "", "", "", f"{passed}/{len(reports)}"])
    return buf.getvalue()
