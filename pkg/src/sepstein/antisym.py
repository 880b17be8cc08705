"""Bounds on the antisymmetric Werner states and the fixed-point smoothing check."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .conic import Affine, Model, require_optimal
from .divergences import TRACE_BALL, SmoothBall, dmax_smoothed
from .errors import DomainError, SizeError
from .linalg import DEFAULT_MAX_DIM, BipartiteState, permute_subsystems, tensor, trace_norm
from .measures import dmax_ent, e_kappa_tilde, measured_lower_bound
from .protocols import regroup_tensor_power
from .states import antisym, antisym_matrix, diag_projector, symwerner_matrix, werner_twirl

CSW_BITS = 0.5 * math.log2(4.0 / 3.0)
TABLE_CAP = 20
CLOSED_FORM_TOL = 1e-6
DELTA_GRID = (0.0, 0.1, 0.25, 0.5)


def lower_closed_form(d):
    return math.log2(1.0 + 1.0 / d)


def upper_closed_form(d):
    return math.log2(1.0 + 2.0 / d)


@dataclass
class AntisymRow:
    d: int
    lower_bits: float
    upper_bits: float
    csw_bits: float
    gap_certified: bool
    analytic: bool = False
    closed_form_ok: bool = True


def antisym_row(d, max_dim=DEFAULT_MAX_DIM, options=None):
    """One table row; SDP values when ``d^2`` fits the dimension cap."""
    lo_cf, up_cf = lower_closed_form(d), upper_closed_form(d)
    if d * d > max_dim:
        lo, up, analytic = lo_cf, up_cf, True
    else:
        rho = antisym(d)
        lo = measured_lower_bound(rho, diag_projector(d), "werner", options=options).value
        up = e_kappa_tilde(rho, "werner", options=options)[0].value
        analytic = False
    ok = abs(lo - lo_cf) <= CLOSED_FORM_TOL and abs(up - up_cf) <= CLOSED_FORM_TOL
    return AntisymRow(d, lo, up, CSW_BITS, up < CSW_BITS - 1e-9, analytic, ok)


def antisym_table(d_min=2, d_max=TABLE_CAP, max_dim=DEFAULT_MAX_DIM, jobs=1, options=None):
    """Rows for ``d_min <= d <= d_max`` of the two bounds against the CSW constant."""
    if not 2 <= d_min <= d_max:
        raise DomainError(f"need 2 <= d_min <= d_max, got {d_min}, {d_max}")
    if d_max > TABLE_CAP:
        raise SizeError(f"d_max {d_max} exceeds the table cap {TABLE_CAP}")
    ds = range(d_min, d_max + 1)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(lambda d: antisym_row(d, max_dim, options), ds))
    return [antisym_row(d, max_dim, options) for d in ds]


TABLE_FIELDS = ("d", "lower_bits", "upper_bits", "csw_bits", "gap_certified")


def table_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_FIELDS)
    for r in rows:
        w.writerow([r.d, repr(r.lower_bits), repr(r.upper_bits), repr(r.csw_bits),
                    str(r.gap_certified).lower()])
    return buf.getvalue()


def table_to_json(rows):
    return json.dumps([asdict(r) for r in rows])


def table_from_json(text):
    return [AntisymRow(**obj) for obj in json.loads(text)]


# ---------------------------------------------------------------------------
# Fixed points of the factorwise Werner twirl


@dataclass
class WernerFixedPoint:
    """Weights ``P_I`` over subsets ``I`` of ``[n]``; bit k of the index marks k in I."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (2**self.n,):
            raise DomainError(f"need {2**self.n} weights for n={self.n}, got shape {w.shape}")
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be nonnegative and sum to 1")
        self.weights = w

    @property
    def p_full(self):
        return float(self.weights[-1])


def fixed_point_state(d, fp, max_dim=DEFAULT_MAX_DIM):
    """``sum_I P_I alpha^{(x) I} (x) sigma^{(x) I^c}`` on the A^n : B^n split."""
    n = fp.n
    if d ** (2 * n) > max_dim:
        raise SizeError(f"{n} copies of {d}x{d} exceed the cap {max_dim}")
    a, s = antisym_matrix(d), symwerner_matrix(d)
    total = np.zeros((d ** (2 * n),) * 2, dtype=complex)
    for idx, w in enumerate(fp.weights):
        if w == 0:
            continue
        total += w * tensor(*[a if idx >> k & 1 else s for k in range(n)])
    return BipartiteState(permute_subsystems(total, [d] * (2 * n), _ab_to_split(n)), d**n, d**n)


def _ab_to_split(n):
    """Factor order taking (A1 B1 A2 B2 ...) to (A1 A2 ... B1 B2 ...)."""
    return [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]


def factorwise_twirl_deviation(state, d, n):
    """Distance between a regrouped n-copy operator and its factorwise Werner twirl."""
    x = state.matrix
    dims = [d] * (2 * n)
    inv = [0] * (2 * n)
    for k in range(n):
        inv[2 * k], inv[2 * k + 1] = k, n + k
    y = permute_subsystems(x, dims, inv)  # back to (AB)^n order
    dd = d * d
    for k in range(n):
        t = y.reshape([dd] * (2 * n))
        t = np.moveaxis(t, [k, n + k], [0, 1]).reshape(dd, dd, -1)
        tw = np.stack([werner_twirl(t[:, :, j], d) for j in range(t.shape[2])], axis=2)
        shape = [dd, dd] + [dd] * (2 * n - 2)
        y = np.moveaxis(tw.reshape(shape), [0, 1], [k, n + k]).reshape(dd**n, dd**n)
    return float(np.linalg.norm(permute_subsystems(y, dims, _ab_to_split(n)) - x))


def power_measured_bound(d, n, max_dim=DEFAULT_MAX_DIM, options=None):
    """Measured lower bound for ``alpha_d^{(x) n}`` with the test ``(1-P_diag)^{(x) n}``.

    The minimum runs over factorwise-twirl-invariant states that are PPT on
    the A^n : B^n cut, i.e. nonnegative mixtures of the ``2^n`` products of
    alpha_d and sigma_d.  Since ``Tr[(1-P)^{(x)n} alpha^{(x)n}] = 1`` the
    binary divergence reduces to ``-log2 q_max``.
    """
    if d ** (2 * n) > max_dim:
        raise SizeError(f"{n} copies of {d}x{d} exceed the cap {max_dim}")
    dims = (d**n, d**n)
    eff = _offdiag_power(d, n)
    m = Model()
    total = Affine(d ** (2 * n))
    weights, overlaps = [], []
    for idx in range(2**n):
        g = fixed_point_state(d, WernerFixedPoint(n, np.eye(2**n)[idx]), max_dim).matrix
        w = m.scalar(nonneg=True)
        total = total + w.kron(g)
        weights.append(w)
        overlaps.append(float(np.real(np.trace(eff @ g))))
    m.eq(sum(weights[1:], weights[0]), 1.0)
    m.psd(total.pt(dims))
    m.maximize(sum((w * q for w, q in zip(weights[1:], overlaps[1:])), weights[0] * overlaps[0]))
    res = require_optimal(m.solve(options), "product-family overlap")
    q = min(max(res.value, 0.0), 1.0)
    return -math.log2(q) if q > 0 else math.inf


def _offdiag_power(d, n):
    """``(1 - P_diag)^{(x) n}`` on the A^n : B^n split."""
    return permute_subsystems(tensor(*([np.eye(d * d) - diag_projector(d)] * n)),
                              [d] * (2 * n), _ab_to_split(n))


def fixed_point_distance(d, fp):
    """``1/2 ||alpha^{(x) n} - rho_n||_1``; equals ``1 - P_[n]`` by orthogonality."""
    full = WernerFixedPoint(fp.n, np.eye(2**fp.n)[-1])
    return 0.5 * trace_norm(fixed_point_state(d, full).matrix - fixed_point_state(d, fp).matrix)


@dataclass
class SteinReport:
    d: int
    n: int
    model: str
    dmax: float
    rows: list  # (delta, smoothed, lower, left_slack, right_slack)

    @property
    def min_slack(self):
        return min(min(r[3], r[4]) for r in self.rows)

    def ok(self, tol=1e-6):
        return self.min_slack >= -tol

    def to_dict(self):
        return {"d": self.d, "n": self.n, "model": self.model, "dmax": self.dmax,
                "rows": [dict(zip(("delta", "smoothed", "lower", "left_slack", "right_slack"), r))
                         for r in self.rows],
                "min_slack": self.min_slack,
                "note": "PPT_n stands in for S_n; the fixed-point argument only uses twirl-closed convexity"}


def stein_smoothing_check(d, n, deltas=DELTA_GRID, model="ppt", max_dim=DEFAULT_MAX_DIM, options=None):
    """``D_max - log2 1/(1-delta) <= D_max^{delta,T} <= D_max`` for ``alpha_d^{(x) n}``.

    Both sides are taken against the PPT set on the regrouped A^n : B^n cut.
    """
    if n not in (1, 2):
        raise DomainError(f"n must be 1 or 2, got {n}")
    if d ** (2 * n) > max_dim:
        raise SizeError(f"{n} copies of {d}x{d} exceed the cap {max_dim}")
    rho = regroup_tensor_power(antisym(d), n, max_dim)
    base = dmax_ent(rho, model, options=options).value
    rows = []
    for delta in deltas:
        if delta == 0:
            sm = base
        else:
            sm = dmax_smoothed(rho.matrix, model, SmoothBall(TRACE_BALL, delta), rho.dims, options)
        lower = base - math.log2(1.0 / (1.0 - delta))
        rows.append((delta, sm, lower, sm - lower, base - sm))
    return SteinReport(d, n, str(model), base, rows)
