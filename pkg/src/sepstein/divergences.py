"""Relative entropies on explicit states: Umegaki, max, hypothesis testing, smoothed.

All logarithms are base 2.  Infinite values are returned as ``math.inf`` by
the library; :func:`capped` turns them into the 60-bit cap used in records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import Affine, Model, require_optimal
from .errors import DomainError
from .linalg import as_hermitian, eig_h, gen_trace_distance, purified_distance
from .models import (
    _real_data,
    check_admissible,
    cone_constraint,
    dual_cone_constraint,
    parse_model,
    robustness,
)

CAP_BITS = 60.0
SUPPORT_TOL = 1e-10
# type-II errors below this are within a few solver gap tolerances of 0; reported as the cap
TYPE2_RESOLUTION = 1e-7

ALL = "all"
PPT_MEAS = "ppt"
SEP_MEAS = "sep"


def capped(x):
    """Map +/-inf to +/-CAP_BITS; returns (value, was_capped)."""
    if x >= CAP_BITS:
        return CAP_BITS, True
    if x <= -CAP_BITS:
        return -CAP_BITS, True
    return float(x), False


@dataclass(frozen=True)
class MeasClass:
    """Binary-measurement class: all tests, PPT tests, or separable tests under a model."""

    kind: str = ALL
    model: str = "ppt"

    def __post_init__(self):
        if self.kind not in (ALL, PPT_MEAS, SEP_MEAS):
            raise DomainError(f"unknown measurement class {self.kind!r}")
        parse_model(self.model)

    def __str__(self):
        return f"sep({self.model})" if self.kind == SEP_MEAS else self.kind


def _dims_of(x, dims):
    if dims is not None:
        return tuple(dims)
    d = int(round(np.sqrt(x.shape[0])))
    return (d, d)


def _mat(x):
    return np.asarray(getattr(x, "matrix", x), dtype=complex)


def _dims_from(x, dims):
    if dims is None and hasattr(x, "dims"):
        return x.dims
    return _dims_of(_mat(x), dims)


def umegaki(rho, sigma):
    """``Tr[rho (log rho - log sigma)]``; ``inf`` if supp(rho) is not inside supp(sigma)."""
    rho, sigma = as_hermitian(_mat(rho)), as_hermitian(_mat(sigma))
    wr, vr = eig_h(rho)
    ws, vs = eig_h(sigma)
    keep_s = ws > SUPPORT_TOL
    keep_r = wr > SUPPORT_TOL
    # weight of rho outside supp(sigma)
    proj_ker = vs[:, ~keep_s]
    if proj_ker.size and np.real(np.trace(proj_ker.conj().T @ rho @ proj_ker)) > SUPPORT_TOL:
        return math.inf
    p = wr[keep_r]
    term1 = float(np.sum(p * np.log2(p)))
    overlap = np.abs(vr[:, keep_r].conj().T @ vs[:, keep_s]) ** 2
    term2 = float(np.sum(p[:, None] * overlap * np.log2(ws[keep_s])[None, :]))
    # Klein's inequality: only rounding can make this negative
    return max(term1 - term2, 0.0)


def dmax(x, sigma):
    """``log2 min{lambda >= 0 : x <= lambda sigma}`` with the usual conventions.

    ``inf`` when x has weight outside supp(sigma); ``-inf`` when the minimum is 0.
    """
    x, sigma = as_hermitian(_mat(x)), as_hermitian(_mat(sigma))
    ws, vs = eig_h(sigma)
    keep = ws > SUPPORT_TOL
    vk, vn = vs[:, keep], vs[:, ~keep]
    if vn.size:
        if np.linalg.eigvalsh(x)[0] < -SUPPORT_TOL:
            # indefinite x: the kernel block may be absorbed, solve directly
            return _dmax_sdp(x, sigma)
        if np.linalg.eigvalsh(vn.conj().T @ x @ vn)[-1] > SUPPORT_TOL:
            return math.inf
    if not keep.any():
        return -math.inf
    s_inv = vk / np.sqrt(ws[keep])
    lam = float(np.linalg.eigvalsh(s_inv.conj().T @ x @ s_inv)[-1])
    if lam <= 0:
        return -math.inf
    return math.log2(lam)


def _dmax_sdp(x, sigma):
    m = Model()
    lam = m.scalar(nonneg=True)
    m.psd(lam.kron(sigma) - x)
    m.minimize(lam)
    res = m.solve()
    if res.status == "PrimalInfeasible":
        return math.inf
    require_optimal(res, "max-relative entropy")
    return -math.inf if res.value <= 0 else math.log2(res.value)


# ---------------------------------------------------------------------------
# Hypothesis testing


def _test_operator(m, n, mclass, dims, real):
    """A variable E with 0 <= E <= 1 and (E, 1-E) in the measurement class."""
    if mclass.kind == SEP_MEAS:
        e = cone_constraint(m, mclass.model, dims, real=real).expr
        f = cone_constraint(m, mclass.model, dims, real=real).expr
        m.eq(e + f, np.eye(n))
        return e
    e = m.herm(n, real=real, psd=True)
    m.psd(Affine.constant(np.eye(n)) - e)
    if mclass.kind == PPT_MEAS:
        m.psd(e.pt(dims))
        m.psd(Affine.constant(np.eye(n)) - e.pt(dims))
    return e


@dataclass
class TestResult:
    """Outcome of a hypothesis-testing program: value in bits and the optimal test."""

    value: float
    capped: bool
    E: np.ndarray
    min_type2: float
    result: object = field(repr=False, default=None)


def _as_meas(mclass):
    if isinstance(mclass, MeasClass):
        return mclass
    if mclass in (ALL, PPT_MEAS):
        return MeasClass(mclass)
    return MeasClass(SEP_MEAS, mclass)


def _finish(t, e, res):
    t = max(float(t), 0.0)
    if t <= TYPE2_RESOLUTION:
        return TestResult(CAP_BITS, True, e, t, res)
    return TestResult(max(-math.log2(min(t, 1.0)), 0.0), False, e, t, res)


def dh_test(rho, sigma, eps, mclass=ALL, dims=None, options=None):
    """Hypothesis-testing program ``min Tr[E sigma]`` with ``Tr[E rho] >= 1 - eps``."""
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    mclass = _as_meas(mclass)
    dims = _dims_from(rho, dims)
    rho, sigma = _mat(rho), _mat(sigma)
    if mclass.kind == SEP_MEAS:
        check_admissible(mclass.model, dims, rho, sigma)
    n = rho.shape[0]
    m = Model()
    e = _test_operator(m, n, mclass, dims, _real_data(rho, sigma))
    m.nonneg(e.inner(rho) - (1.0 - eps))
    m.minimize(e.inner(sigma))
    res = require_optimal(m.solve(options), "hypothesis testing")
    return _finish(res.value, res.value_of(e), res)


def dh_eps(rho, sigma, eps, mclass=ALL, dims=None, options=None):
    """``D_H^{M, eps}(rho || sigma)`` in bits, capped at 60."""
    return dh_test(rho, sigma, eps, mclass, dims, options).value


def dh_vs_set_test(rho, eps, mclass, model="ppt", dims=None, options=None):
    """``min_E max_{sigma in model} Tr[E sigma]`` with class constraints on E.

    The inner maximum is dualized: ``t 1 - E`` in the dual cone of the model.
    """
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    mclass = _as_meas(mclass)
    model = parse_model(model)
    dims = _dims_from(rho, dims)
    rho = _mat(rho)
    check_admissible(model, dims, rho)
    if mclass.kind == SEP_MEAS:
        check_admissible(mclass.model, dims, rho)
    n = rho.shape[0]
    real = _real_data(rho)
    m = Model()
    e = _test_operator(m, n, mclass, dims, real)
    t = m.scalar()
    m.nonneg(e.inner(rho) - (1.0 - eps))
    dual_cone_constraint(m, t.kron(np.eye(n)) - e, model, dims, real=real)
    m.minimize(t)
    res = require_optimal(m.solve(options), "hypothesis testing against a set")
    return _finish(res.value, res.value_of(e), res)


def dh_eps_vs_set(rho, eps, mclass, model="ppt", dims=None, options=None):
    return dh_vs_set_test(rho, eps, mclass, model, dims, options).value


# ---------------------------------------------------------------------------
# Smoothing

TRACE_BALL = "trace"
PURIFIED_BALL = "purified"


@dataclass(frozen=True)
class SmoothBall:
    kind: str
    eps: float

    def __post_init__(self):
        if self.kind not in (TRACE_BALL, PURIFIED_BALL):
            raise DomainError(f"unknown smoothing ball {self.kind!r}")
        if not 0.0 <= self.eps < 1.0:
            raise DomainError(f"smoothing radius must lie in [0, 1), got {self.eps}")


@dataclass
class SmoothResult:
    value: float
    rho_smooth: np.ndarray
    result: object = field(repr=False, default=None)


def _smoothed_point(m, rho, ball, real):
    """Add the smoothed variable for ``ball`` around the state ``rho``."""
    n = rho.shape[0]
    if ball.kind == TRACE_BALL:
        rt = m.herm(n, real=real, psd=True)
        m.eq(rt.trace(), 1.0)
        p = m.herm(n, real=real, psd=True)
        q = m.herm(n, real=real, psd=True)
        m.eq(rt + p - q, rho)
        m.nonneg(ball.eps - p.trace())
        return rt
    # purified ball: sqrt F = ||sqrt(rho) sqrt(rho')||_1 + sqrt((1-Tr rho)(1-Tr rho')) >= sqrt(1-eps^2),
    # with the trace norm as max Re Tr Z over [[rho, Z], [Z^H, rho']] >= 0
    rp = m.herm(n, real=real, psd=True)
    z = m.general(n, real=real)
    top = np.vstack([np.eye(n), np.zeros((n, n))])
    bot = np.vstack([np.zeros((n, n)), np.eye(n)])
    wr, vr = eig_h(rho)
    if wr[0] > 1e-8:
        # congruence by diag(rho^{-1/2}, 1): Z = sqrt(rho) K, top-left block becomes 1
        corner, overlap = np.eye(n), z.inner((vr * np.sqrt(wr)) @ vr.conj().T)
    else:
        corner, overlap = rho, z.inner(np.eye(n))
    blk = top @ z @ bot.T + bot @ z.H @ top.T + bot @ rp @ bot.T + top @ corner @ top.T
    m.psd(blk)
    m.nonneg(1.0 - rp.trace())
    tr_rho = float(np.real(np.trace(rho)))
    if 1.0 - tr_rho <= 1e-12:
        # normalized center: the geometric-mean term vanishes identically
        m.nonneg(overlap - math.sqrt(1.0 - ball.eps**2))
        return rp
    h = m.scalar(nonneg=True)
    corner = Affine(2) + np.diag([1.0 - tr_rho, 0.0])
    corner = corner + (1.0 - rp.trace()).kron(np.diag([0.0, 1.0]))
    corner = corner + h.kron(np.array([[0.0, 1.0], [1.0, 0.0]]))
    m.psd(corner)
    m.nonneg(overlap + h - math.sqrt(1.0 - ball.eps**2))
    return rp


def dmax_smoothed_solve(rho, sigma_or_model, ball, dims=None, options=None):
    """Smoothed max-relative entropy against a fixed state or a separability model."""
    dims = _dims_from(rho, dims)
    rho = _mat(rho)
    is_model = isinstance(sigma_or_model, str) or hasattr(sigma_or_model, "kind")
    if ball.eps == 0.0:
        if is_model:
            r = robustness(rho, sigma_or_model, dims, options)
            return SmoothResult(math.log2(1.0 + r.value), rho, r.result)
        return SmoothResult(dmax(rho, _mat(sigma_or_model)), rho, None)
    m = Model()
    if is_model:
        model = check_admissible(sigma_or_model, dims, rho)
        real = _real_data(rho)
        rs = _smoothed_point(m, rho, ball, real)
        cc = cone_constraint(m, model, dims, real=real)
        m.psd(cc.expr - rs)
        m.minimize(cc.expr.trace())
    else:
        sigma = _mat(sigma_or_model)
        real = _real_data(rho, sigma)
        rs = _smoothed_point(m, rho, ball, real)
        lam = m.scalar(nonneg=True)
        ws, vs = eig_h(sigma)
        base = dmax(rho, sigma)
        if ws[0] > SUPPORT_TOL and math.isfinite(base):
            # whiten: rho' <= lam sigma  <=>  W rho' W^H <= mu 1, W = sigma^{-1/2} / sqrt(scale)
            scale = 2.0**base
            w = (vs / np.sqrt(ws * scale)).conj().T
            m.psd(lam.kron(np.eye(rho.shape[0])) - w @ rs @ w.conj().T)
        else:
            scale = 1.0
            m.psd(lam.kron(sigma) - rs)
        m.minimize(lam)
    res = m.solve(options)
    res = require_optimal(res, f"smoothed max-relative entropy ({ball.kind})")
    val = res.value * (1.0 if is_model else scale)
    value = -math.inf if val <= 2.0**-CAP_BITS else math.log2(val)
    return SmoothResult(value, res.value_of(rs), res)


def dmax_smoothed(rho, sigma_or_model, ball, dims=None, options=None):
    return dmax_smoothed_solve(rho, sigma_or_model, ball, dims, options).value


# ---------------------------------------------------------------------------
# Inequality chains


@dataclass
class ChainReport:
    values: dict
    slacks: dict

    @property
    def min_slack(self):
        return min(self.slacks.values())

    def ok(self, tol=1e-6):
        return self.min_slack >= -tol


def check_anshu_chain(rho, sigma, eps, delta, dims=None, options=None):
    """``D_H^{1-eps} >= D_max^{sqrt eps, P} - log 1/(1-eps) >= D_H^{1-eps-delta} - log 4/delta^2``."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0 - eps**2:
        raise DomainError(f"delta must lie in (0, 1 - eps^2), got {delta}")
    a = dh_eps(rho, sigma, 1.0 - eps, ALL, dims, options)
    b = dmax_smoothed(rho, sigma, SmoothBall(PURIFIED_BALL, math.sqrt(eps)), dims, options)
    b -= math.log2(1.0 / (1.0 - eps))
    e3 = 1.0 - eps - delta
    # a negative type-I parameter makes the program infeasible: D_H = -inf
    c = -math.inf if e3 < 0 else dh_eps(rho, sigma, e3, ALL, dims, options) - math.log2(4 / delta**2)
    return ChainReport({"dh_upper": a, "dmax_p": b, "dh_lower": c},
                       {"left": _diff(a, b), "right": _diff(b, c)})


def check_tp_smoothing(rho, sigma, eps, dims=None, options=None):
    """``D_max^{sqrt(eps(2-eps)),P} <= D_max^{eps,T} <= D_max^{sqrt eps,P} + log 1/(1-eps)``."""
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    lo = dmax_smoothed(rho, sigma, SmoothBall(PURIFIED_BALL, math.sqrt(eps * (2 - eps))), dims, options)
    mid = dmax_smoothed(rho, sigma, SmoothBall(TRACE_BALL, eps), dims, options)
    hi = dmax_smoothed(rho, sigma, SmoothBall(PURIFIED_BALL, math.sqrt(eps)), dims, options)
    hi += math.log2(1.0 / (1.0 - eps))
    return ChainReport({"dmax_p_lower": lo, "dmax_t": mid, "dmax_p_upper": hi},
                       {"left": _diff(mid, lo), "right": _diff(hi, mid)})


def check_tp_smoothing_same_radius(rho, sigma, eps, dims=None, options=None):
    """``D_max^{eps,T} <= D_max^{eps,P} + log 1/(1-eps)``.

    This is the form the trace-ball argument supports directly: a P-ball
    point rescaled by its trace lies in the T-ball of the same radius.
    """
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    mid = dmax_smoothed(rho, sigma, SmoothBall(TRACE_BALL, eps), dims, options)
    hi = dmax_smoothed(rho, sigma, SmoothBall(PURIFIED_BALL, eps), dims, options)
    hi += math.log2(1.0 / (1.0 - eps))
    return ChainReport({"dmax_t": mid, "dmax_p_same": hi}, {"right": _diff(hi, mid)})


def check_fuchs_van_de_graaf(rho, sigma):
    t = gen_trace_distance(_mat(rho), _mat(sigma))
    p = purified_distance(_mat(rho), _mat(sigma))
    return ChainReport({"T": t, "P": p}, {"left": p - t, "right": math.sqrt(t * (2 - t)) - p})


def _diff(big, small):
    if math.isinf(big) and big > 0 or math.isinf(small) and small < 0:
        return math.inf
    return big - small
