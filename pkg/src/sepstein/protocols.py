"""One-shot distillation and dilution bounds, and the explicit dilution maps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import lambda_dne_check, lambda_ne_check
from .divergences import TRACE_BALL, MeasClass, SEP_MEAS, SmoothBall, capped, dmax_smoothed_solve
from .errors import ConsistencyError, DomainError, SizeError
from .linalg import DEFAULT_MAX_DIM, BipartiteState, as_state, eig_h, permute_subsystems, tensor
from .measures import dh_ent
from .models import IN, OUT, parse_model, robustness

GUARD = 1e-9
NE = "NE"
DNE = "DNE"
DOUBLING = "Doubling"

DISTILL_LOWER_REF = "one-shot-distillable-dne:lower"
DISTILL_UPPER_REF = "one-shot-distillable-dne:upper"
COST_LOWER_REF = "one-shot-cost-dne:lower"
COST_UPPER_REF = "one-shot-cost-dne:upper"


def guarded_floor(x):
    return math.floor(x + GUARD)


def guarded_ceil(x):
    return math.ceil(x - GUARD)


@dataclass
class ProtocolBound:
    """Integer-resolution sandwich on a one-shot protocol rate, in bits.

    ``lower_rigorous`` / ``upper_rigorous`` say whether each side holds for
    the true separable set given the model used; ``upper_bits`` is None when
    the formula does not apply.
    """

    lower_bits: float
    upper_bits: float | None
    lower_ref: str
    upper_ref: str
    eps: float
    delta: float
    model: str
    lower_rigorous: bool
    upper_rigorous: bool
    core_bits: float = 0.0
    artifacts: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "lower_bits": self.lower_bits,
            "upper_bits": self.upper_bits,
            "upper_available": self.upper_bits is not None,
            "lower_ref": self.lower_ref,
            "upper_ref": self.upper_ref,
            "eps": self.eps,
            "delta": self.delta,
            "model": self.model,
            "lower_rigorous": self.lower_rigorous,
            "upper_rigorous": self.upper_rigorous,
            "core_bits": capped(self.core_bits)[0],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


CSV_FIELDS = ("lower_bits", "upper_bits", "upper_available", "lower_ref", "upper_ref",
              "eps", "delta", "model", "lower_rigorous", "upper_rigorous", "core_bits")


def bounds_to_csv(bounds):
    """CSV table of a sweep of ProtocolBound rows."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for b in bounds:
        w.writerow(b.to_dict())
    return buf.getvalue()


def _check_delta(delta):
    if not delta >= 0.0:
        raise DomainError(f"delta must be nonnegative, got {delta}")


def distill_bounds(rho, eps, delta, model="ppt", dims=None, options=None):
    """``floor(D_H) <= E_d <= D_H + log2(1+delta) + 1`` with separable tests.

    Under an outer model the computed D_H can only exceed the separable one,
    so only the upper side stays rigorous outside the exact regime.
    """
    _check_delta(delta)
    st = as_state(rho, dims)
    model = parse_model(model)
    r = dh_ent(st, eps, MeasClass(SEP_MEAS, str(model)), model, options=options)
    core = r.value
    exact = model.exact_for(st.dims)
    lower = max(guarded_floor(core), 0)
    upper = core + math.log2(1.0 + delta) + 1.0
    return ProtocolBound(float(lower), upper, DISTILL_LOWER_REF, DISTILL_UPPER_REF, eps, delta,
                         str(model), exact, True, core, {"E": r.extras["E"], "direction": r.direction})


def cost_bounds(rho, eps, delta, model="ppt", dims=None, options=None):
    """``D_max^{eps,T} - log2(1+delta) <= E_c <= ceil(log2(2/(1+delta) 2^D + 1/delta))``.

    The upper formula needs delta > 0.  An outer model lowers D_max, which
    keeps the lower side rigorous and makes the upper side heuristic.
    """
    _check_delta(delta)
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    st = as_state(rho, dims)
    model = parse_model(model)
    sm = dmax_smoothed_solve(st.matrix, model, SmoothBall(TRACE_BALL, eps), st.dims, options)
    core = max(sm.value, 0.0)
    exact = model.exact_for(st.dims)
    lower = max(core - math.log2(1.0 + delta), 0.0)
    upper = None
    if delta > 0:
        upper = float(guarded_ceil(math.log2(2.0 / (1.0 + delta) * 2.0**core + 1.0 / delta)))
    return ProtocolBound(lower, upper, COST_LOWER_REF, COST_UPPER_REF, eps, delta, str(model),
                         True, exact and upper is not None, core, {"rho_smooth": sm.rho_smooth})


# ---------------------------------------------------------------------------
# Dilution maps


def _check_pos(delta, R):
    if not delta > 0 or not R > 0:
        raise DomainError(f"delta and R must be positive, got delta={delta}, R={R}")


def dilution_dim(delta, R, variant=NE):
    """Smallest output dimension reaching error delta: d' (NE) or d'' (DNE)."""
    _check_pos(delta, R)
    if variant == NE:
        r = R
    elif variant == DNE:
        r = 1.0 + 2.0 * R
    else:
        raise DomainError(f"unknown dilution variant {variant!r}")
    return max(guarded_ceil((1.0 + max(r, 1.0 / delta)) / (1.0 + max(1.0 / r, delta))), 1)


def minimal_dilution_dim(delta, R, variant=NE):
    """Least d whose best error ``delta'(d, R)`` or ``delta''(d, R)`` is at most delta.

    For NE this coincides with :func:`dilution_dim`.  For DNE the closed form
    obtained by R -> 1 + 2R is only sufficient; here the piecewise error is
    inverted branch by branch.
    """
    _check_pos(delta, R)
    if variant == NE:
        return dilution_dim(delta, R, NE)
    if variant != DNE:
        raise DomainError(f"unknown dilution variant {variant!r}")
    tail = max(guarded_ceil(max(2.0 * R, R * (1.0 + delta) / (delta * (1.0 + R)))), 1)
    head = max(guarded_ceil(2.0 * (1.0 + R) / (1.0 + delta) - 1.0), 1)
    return head if head <= 2.0 * R else tail


def delta_prime(d, R):
    """Best NE error of the mixing construction at output dimension d."""
    if d <= R:
        return (1.0 + R) / d - 1.0
    return R / ((d - 1) * R + d)


def delta_dprime(d, R):
    """Best error when the mixing weight is restricted to [1/(d+1), 1]."""
    if d <= 2 * R:
        return 2.0 * (1.0 + R) / (d + 1) - 1.0
    return R / ((d - 1) * R + d)


def mixing_weight(d, R, variant=NE):
    q0 = (1.0 - R / d) / ((d - 1) / d * R + 1.0)
    if variant == NE:
        return q0 if d >= R else 0.0
    return max(q0, 1.0 / (d + 1))


@dataclass
class DilutionConstruction:
    R: float
    delta: float
    q: float
    d: int
    rho_t: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    variant: str
    verdict: object = field(default=None, repr=False)

    def to_dict(self):
        return {"R": self.R, "delta": self.delta, "q": self.q, "d": self.d,
                "variant": self.variant,
                "verdict": getattr(self.verdict, "status", None)}


def _check(variant, d, rho_t, omega, delta, model, dims, options):
    fn = lambda_ne_check if variant == NE else lambda_dne_check
    return fn(d, rho_t, omega, delta, model, dims, options)


def construct_dilution(rho_t, delta, variant=NE, model="ppt", dims=None, options=None):
    """Build ``omega = q rho_t + (1-q) omega_t`` and verify the resulting map.

    ``omega_t`` is read off the robustness-optimal separable state as
    ``((1+R) sigma - rho_t) / R``.
    """
    st = as_state(rho_t, dims)
    model = parse_model(model)
    if variant not in (NE, DNE):
        raise DomainError(f"unknown dilution variant {variant!r}")
    rob = robustness(st.matrix, model, st.dims, options)
    R = rob.value
    if R <= 1e-7:
        raise DomainError("construction needs an entangled target (R > 0)")
    d = dilution_dim(delta, R, variant)
    w, v = eig_h(((1.0 + R) * rob.sigma - st.matrix) / R)
    # solver noise leaves eigenvalues of order -1e-9
    omega_t = (v * np.clip(w, 0.0, None)) @ v.conj().T
    omega_t = omega_t / np.real(np.trace(omega_t))
    q = mixing_weight(d, R, variant)
    omega = q * st.matrix + (1.0 - q) * omega_t
    verdict = _check(variant, d, st.matrix, omega, delta, model, st.dims, options)
    if verdict.status == OUT:
        raise ConsistencyError(f"{variant} dilution at d={d} fails its membership check")
    return DilutionConstruction(R, delta, q, d, st.matrix, omega, variant, verdict)


def dne_doubling(d, rho_t, omega, delta=None, model="ppt", dims=None, options=None):
    """Upgrade an NE dilution map at d to a DNE one at 2d.

    Returns ``(2d, omega')`` with ``omega' = rho_t/(2d) + (2d-1)/(2d) omega``.
    When delta is given the precondition is verified first.
    """
    rho_t = np.asarray(getattr(rho_t, "matrix", rho_t), dtype=complex)
    omega = np.asarray(getattr(omega, "matrix", omega), dtype=complex)
    if delta is not None:
        pre = lambda_ne_check(d, rho_t, omega, delta, model, dims, options)
        if pre.status == OUT:
            raise DomainError("input map is not delta-approximately non-entangling")
    d2 = 2 * d
    return d2, rho_t / d2 + (d2 - 1) / d2 * omega


def doubled_construction(c, model="ppt", dims=None, options=None):
    """Apply :func:`dne_doubling` to an NE construction and check DNE membership."""
    d2, om = dne_doubling(c.d, c.rho_t, c.omega)
    verdict = lambda_dne_check(d2, c.rho_t, om, c.delta, model, dims, options)
    if verdict.status == OUT:
        raise ConsistencyError(f"doubled construction at d={d2} fails its DNE check")
    return DilutionConstruction(c.R, c.delta, c.q, d2, c.rho_t, om, DOUBLING, verdict)


def regroup_tensor_power(rho, n, max_dim=DEFAULT_MAX_DIM):
    """``rho^{(x) n}`` on (AB)^n reordered to the A^n : B^n split."""
    st = as_state(rho)
    da, db = st.dims
    if (da * db) ** n > max_dim:
        raise SizeError(f"{n} copies of a {da * db}-dimensional state exceed the cap {max_dim}")
    big = tensor(*([st.matrix] * n))
    dims = [da, db] * n
    perm = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    out = permute_subsystems(big, dims, perm)
    return BipartiteState(out, da**n, db**n)


def is_in(verdict):
    return verdict is not None and verdict.status == IN
