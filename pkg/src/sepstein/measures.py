"""Entanglement quantifiers on top of the divergences and separability models.

Every value carries a direction flag relative to the true separable set:
``exact``, ``lower-bound-for-S``, ``upper-bound-for-S`` or ``indeterminate``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .conic import Model, require_optimal
from .divergences import CAP_BITS, MeasClass, SEP_MEAS, capped, dh_vs_set_test, umegaki
from .errors import DomainError, NumericError
from .linalg import as_state, eig_h, partial_transpose
from .models import (
    _real_data,
    check_admissible,
    cone_constraint,
    max_overlap,
    parse_model,
    robustness,
)
from .states import (
    ISOTROPIC,
    antisym_matrix,
    max_entangled,
    symwerner_matrix,
    tau_matrix,
    twirl_deviation,
)

EXACT = "exact"
LOWER = "lower-bound-for-S"
UPPER = "upper-bound-for-S"
INDETERMINATE = "indeterminate"


@dataclass
class MeasureResult:
    measure: str
    value: float
    model: str
    direction: str
    gap: float = 0.0
    iterations: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        v, was_capped = capped(self.value)
        return {
            "measure": self.measure,
            "value_bits": v,
            "capped": was_capped,
            "model": self.model,
            "direction": self.direction,
            "gap": float(self.gap),
            "iterations": int(self.iterations),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["measure"], obj["value_bits"], obj["model"], obj["direction"],
                   obj["gap"], obj["iterations"])


@dataclass
class KappaWitness:
    """``S`` in the model cone with ``-S^T_B <= rho^T_B <= S^T_B``.

    ``S_pt`` is the operator of the second-line form: ``-S_pt <= rho^T_B <= S_pt``.
    """

    S: np.ndarray
    S_pt: np.ndarray
    residuals: dict


def _min_direction(model, dims):
    """Direction of a minimum taken over the model set instead of S."""
    return EXACT if model.exact_for(dims) else LOWER


def gen_robustness(rho, model="ppt", dims=None, options=None):
    """Generalized robustness ``min r`` with ``rho <= (1+r) sigma``, sigma in the model set."""
    st = as_state(rho, dims)
    model = parse_model(model)
    r = robustness(st.matrix, model, st.dims, options)
    res = r.result
    return MeasureResult("robustness", r.value, str(model), _min_direction(model, st.dims),
                         res.gap, res.iterations, {"sigma": r.sigma})


def dmax_ent(rho, model="ppt", dims=None, options=None):
    """``D_max(rho || S) = log2(1 + R^g)``."""
    r = gen_robustness(rho, model, dims, options)
    return MeasureResult("dmax", math.log2(1.0 + r.value), r.model, r.direction,
                         r.gap, r.iterations, r.extras)


def _kappa(rho, model, options):
    st = as_state(rho)
    x, dims = st.matrix, st.dims
    m = Model()
    real = _real_data(x)
    if model is None:
        s = m.herm(st.dim, real=real, psd=True)
    else:
        s = cone_constraint(m, model, dims, real=real).expr
    m.psd((s + x).pt(dims))
    m.psd((s - x).pt(dims))
    m.minimize(s.trace())
    res = require_optimal(m.solve(options), "kappa entanglement")
    smat = res.value_of(s)
    smat = (smat + smat.conj().T) / 2
    spt = partial_transpose(smat, dims)
    xg = partial_transpose(x, dims)
    resid = {
        "upper": float(np.linalg.eigvalsh(spt - xg)[0]),
        "lower": float(np.linalg.eigvalsh(spt + xg)[0]),
    }
    value = math.log2(max(res.value, 1.0 - 1e-12))
    return max(value, 0.0), KappaWitness(smat, spt, resid), res


def e_kappa(rho, dims=None, options=None):
    """``log2 min Tr S`` with ``-S^T_B <= rho^T_B <= S^T_B`` and ``S >= 0``."""
    st = as_state(rho, dims)
    value, wit, res = _kappa(st, None, options)
    return MeasureResult("ekappa", value, "none", EXACT, res.gap, res.iterations,
                         {"witness": wit})


def e_kappa_tilde(rho, model="ppt", dims=None, options=None):
    """Modified kappa entanglement with ``S`` restricted to the model cone.

    The first-line form ``-S^T_B <= rho^T_B <= S^T_B`` is used for every model;
    for the outer models it agrees with the second-line form, and for the
    exact families it is the form that commutes with the twirl.
    """
    st = as_state(rho, dims)
    model = parse_model(model)
    check_admissible(model, st.dims, st.matrix)
    value, wit, res = _kappa(st, model, options)
    out = MeasureResult("ekappa-tilde", value, str(model), _min_direction(model, st.dims),
                        res.gap, res.iterations)
    return out, wit


def dh_ent(rho, eps, mclass=None, model="ppt", dims=None, options=None):
    """``min_sigma D_H^{M, eps}(rho || sigma)`` over the model set.

    With an outer model the measurement relaxation raises the value while the
    state relaxation lowers it, so the direction is only known where the model
    is exact.
    """
    st = as_state(rho, dims)
    model = parse_model(model)
    mclass = MeasClass(SEP_MEAS, str(model)) if mclass is None else mclass
    t = dh_vs_set_test(st.matrix, eps, mclass, model, st.dims, options)
    meas_exact = getattr(mclass, "kind", None) != SEP_MEAS or parse_model(mclass.model).exact_for(st.dims)
    direction = EXACT if model.exact_for(st.dims) and meas_exact else INDETERMINATE
    return MeasureResult("dh", t.value, str(model), direction, t.result.gap,
                         t.result.iterations, {"E": t.E, "capped": t.capped, "eps": eps,
                                               "mclass": str(mclass)})


def binary_kl(p, q):
    """Binary relative entropy in bits with 0 log 0/q = 0 and p log p/0 = inf."""
    out = 0.0
    for a, b in ((p, q), (1.0 - p, 1.0 - q)):
        if a <= 0.0:
            continue
        if b <= 0.0:
            return math.inf
        out += a * math.log2(a / b)
    return max(out, 0.0)


def golden_min(f, lo, hi, tol=1e-10):
    """Golden-section minimization of a unimodal function on [lo, hi]."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    cands = [(f(a), a), (fc, c), (fd, d), (f(b), b)]
    return min(cands)


def _is_product_diagonal(E, tol=1e-12):
    E = np.asarray(E)
    off = E - np.diag(np.diag(E))
    w = np.real(np.diag(E))
    return np.max(np.abs(off), initial=0) <= tol and w.min() >= -tol and w.max() <= 1 + tol


def certify_sep_measurement(E, dims, options=None):
    """Evidence that ``(E, 1-E)`` is a separable measurement.

    A product-basis diagonal effect is separable outright; otherwise the PPT
    test is used, which is conclusive only on 2x2 and 2x3.
    """
    from .channels import sep_measurement_check

    if _is_product_diagonal(E):
        return "diagonal"
    v = sep_measurement_check(E, "ppt", dims, options)
    if v.status == "In":
        return "ppt-exact"
    if v.status == "Unknown":
        return "ppt-relaxed"
    raise DomainError("the test (E, 1 - E) is not a separable measurement")


def measured_lower_bound(rho, E, family="werner", dims=None, options=None):
    """Lower bound on the separably-measured relative entropy of entanglement.

    Measuring (E, 1-E) maps rho and sigma to binary distributions; the bound is
    the minimum binary divergence over the reachable ``q = Tr[E sigma]``.
    With an exact family the restriction to invariant sigma is sound because
    rho is invariant and the measurement may be twirled.
    """
    st = as_state(rho, dims)
    model = parse_model(family)
    x, dims = st.matrix, st.dims
    E = np.asarray(E, dtype=complex)
    evidence = certify_sep_measurement(E, dims, options)
    if model.is_family:
        check_admissible(model, dims, x)
    p = float(np.real(np.trace(E @ x)))
    p = min(max(p, 0.0), 1.0)
    q_max = max_overlap(E, model, dims, options, strict=False)
    q_min = max_overlap(-E, model, dims, options, strict=False)
    lo, hi = -q_min.value, q_max.value
    lo, hi = min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)
    val, q = golden_min(lambda t: min(binary_kl(p, t), CAP_BITS), lo, max(hi, lo))
    direction = LOWER if evidence != "ppt-relaxed" else INDETERMINATE
    return MeasureResult("measured", val, str(model), direction, 0.0, 0,
                         {"p": p, "q_range": (lo, hi), "q": q, "evidence": evidence})


# ---------------------------------------------------------------------------
# Relative entropy of entanglement against PPT


def _log_derivative(sigma, rho):
    """Frechet derivative of log at sigma applied to rho (natural log)."""
    w, v = eig_h(sigma)
    w = np.clip(w, 1e-300, None)
    lw = np.log(w)
    diff = w[:, None] - w[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(np.abs(diff) > 1e-12 * np.maximum(w[:, None], w[None, :]),
                      (lw[:, None] - lw[None, :]) / np.where(diff == 0, 1, diff),
                      1.0 / w[:, None])
    return v @ (dd * (v.conj().T @ rho @ v)) @ v.conj().T


def _invariant_family(x, dims):
    if dims[0] != dims[1]:
        return None
    for kind in ("werner", ISOTROPIC):
        if twirl_deviation(x, kind) <= 1e-9:
            return kind
    return None


def _ppt_family_segment(kind, d):
    """Endpoints of the PPT states in a twirl-invariant family."""
    if kind == "werner":
        s = symwerner_matrix(d)
        return s, (antisym_matrix(d) + s) / 2
    t = tau_matrix(d)
    return t, max_entangled(d) / d + (d - 1) / d * t


def ree_lower_ppt(rho, dims=None, options=None, tol=1e-6, max_iter=500, use_symmetry=True):
    """Certified lower bound on ``min_{sigma in PPT} D(rho || sigma)`` by Frank-Wolfe.

    Each step linearizes ``-Tr[rho log sigma]`` at the iterate, solves the
    linear program over the PPT slice (a two-point segment when rho is
    twirl-invariant), and line-searches the exact objective.  The reported
    value is the best certified ``f - gap``; the last feasible ``f`` is an
    upper estimate.
    """
    st = as_state(rho, dims)
    x, dims, n = st.matrix, st.dims, st.dim
    fam = _invariant_family(x, dims) if use_symmetry else None
    ends = _ppt_family_segment(fam, dims[0]) if fam else None

    def f(s):
        return umegaki(x, s)

    def lmo(grad):
        if ends is not None:
            vals = [float(np.real(np.trace(grad @ e))) for e in ends]
            return ends[int(np.argmin(vals))]
        m = Model()
        cc = cone_constraint(m, "ppt", dims, real=_real_data(x, grad))
        m.eq(cc.expr.trace(), 1.0)
        m.minimize(cc.expr.inner(grad))
        res = require_optimal(m.solve(options), "Frank-Wolfe linear step")
        s = res.value_of(cc.expr)
        return (s + s.conj().T) / 2

    sigma = (ends[0] + ends[1]) / 2 if ends is not None else np.eye(n) / n
    fval = f(sigma)
    best_lower, gap, it = -math.inf, math.inf, 0
    for it in range(1, max_iter + 1):
        grad = -_log_derivative(sigma, x) / math.log(2)
        grad = (grad + grad.conj().T) / 2
        s = lmo(grad)
        gap = float(np.real(np.trace(grad @ (sigma - s))))
        best_lower = max(best_lower, fval - gap)
        if gap <= tol:
            break
        line = minimize_scalar(
            lambda g: min(f((1 - g) * sigma + g * s), 1e6),
            bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12},
        )
        g = float(line.x)
        if line.fun >= fval:
            g = 0.0
        sigma = (1 - g) * sigma + g * s
        fval = f(sigma)
    if not math.isfinite(best_lower):
        raise NumericError("Frank-Wolfe produced no certified bound", iterations=it)
    value = max(best_lower, 0.0)
    return MeasureResult("ree-ppt", value, "ppt", LOWER, max(gap, 0.0), it,
                         {"upper_estimate": fval, "approximate": gap > tol,
                          "symmetry": fam or "none"})
