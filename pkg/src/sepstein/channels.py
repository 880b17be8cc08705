"""Membership tests for the canonical distillation and dilution maps.

A verdict is three-valued.  Outer models (PPT, DPS) can only prove one side
of each condition; where they coincide with the separable set (2x2, 2x3) both
sides are conclusive.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .linalg import BipartiteState, as_hermitian, min_eig
from .models import (
    IN,
    OUT,
    UNKNOWN,
    MembershipVerdict,
    block_positivity,
    max_overlap,
    parse_model,
    robustness,
    separability_test,
)

DELTA_TOL = 1e-7


def _combine(verdicts):
    statuses = [v.status for v in verdicts]
    if OUT in statuses:
        return OUT
    if UNKNOWN in statuses:
        return UNKNOWN
    return IN


def _check_effect(E):
    E = as_hermitian(E)
    w = np.linalg.eigvalsh(E)
    if w[0] < -1e-9 or w[-1] > 1 + 1e-9:
        raise DomainError("test operator must satisfy 0 <= E <= 1")
    return np.asarray(E)


def _local_dims(n, dims):
    if dims is not None:
        return tuple(dims)
    d = int(round(np.sqrt(n)))
    return (d, d)


def theta_ne_check(m, E, delta, model="ppt", dims=None, options=None):
    """Is ``Theta_{2^m; E}`` delta-approximately non-entangling?

    Holds iff ``max_{sigma in S} Tr[E sigma] <= 2^-m (1 + delta)``.
    """
    E = _check_effect(E)
    model = parse_model(model)
    dims = _local_dims(E.shape[0], dims)
    bound = 2.0 ** (-m) * (1 + delta)
    if np.max(np.abs(E)) == 0:
        return MembershipVerdict(IN, str(model), {"max_overlap": 0.0, "bound": bound})
    ov = max_overlap(E, model, dims, options)
    cert = {"max_overlap": ov.value, "bound": bound, "sigma": ov.sigma}
    if ov.value <= bound + DELTA_TOL:
        # the relaxation upper-bounds the separable maximum
        return MembershipVerdict(IN, str(model), cert)
    return MembershipVerdict(OUT if ov.exact_for_s else UNKNOWN, str(model), cert)


def cone_membership(x, model="ppt", dims=None, options=None):
    """Is the PSD operator ``x`` in cone(S)?  Zero is always in."""
    x = np.asarray(as_hermitian(x))
    model = parse_model(model)
    dims = _local_dims(x.shape[0], dims)
    if min_eig(x) < -1e-9:
        return MembershipVerdict(OUT, str(model), {"min_eig": min_eig(x)})
    tr = float(np.real(np.trace(x)))
    if tr <= 1e-12:
        return MembershipVerdict(IN, str(model), {"trace": tr})
    st = BipartiteState(x / tr, *dims)
    return separability_test(st, model, options=options)


def theta_dne_check(m, E, model="ppt", dims=None, options=None):
    """Is ``Theta_{2^m; E}`` non-entangling for measurements as well as states?

    By the adjoint form, this holds iff ``1 - E`` and ``1 + 2^m E`` both lie in
    cone(S) (together with the state-level condition at delta = 0).
    """
    E = _check_effect(E)
    model = parse_model(model)
    dims = _local_dims(E.shape[0], dims)
    ident = np.eye(E.shape[0])
    parts = [
        cone_membership(ident - E, model, dims, options),
        cone_membership(ident + 2.0**m * E, model, dims, options),
    ]
    return MembershipVerdict(
        _combine(parts), str(model), {"one_minus_E": parts[0], "one_plus_scaled_E": parts[1]}
    )


def sep_measurement_check(E, model="ppt", dims=None, options=None):
    """Is ``(E, 1 - E)`` a separable measurement, i.e. both effects in cone(S)?"""
    E = _check_effect(E)
    model = parse_model(model)
    dims = _local_dims(E.shape[0], dims)
    parts = [
        cone_membership(E, model, dims, options),
        cone_membership(np.eye(E.shape[0]) - E, model, dims, options),
    ]
    return MembershipVerdict(_combine(parts), str(model), {"E": parts[0], "one_minus_E": parts[1]})


def _as_matrix(x):
    return x.matrix if isinstance(x, BipartiteState) else np.asarray(x, dtype=complex)


def lambda_ne_check(d, rho_t, omega, delta, model="ppt", dims=None, options=None):
    """Is ``Lambda_{d; rho_t, omega}`` delta-approximately non-entangling?

    Holds iff both ``omega`` and ``rho_t/d + (d-1)/d omega`` have robustness at
    most delta.  An outer model under-estimates robustness, so a violation is
    conclusive while satisfaction is conclusive only where the model is exact.
    """
    rho_t, omega = _as_matrix(rho_t), _as_matrix(omega)
    model = parse_model(model)
    dims = _local_dims(rho_t.shape[0], dims)
    if d < 1:
        raise DomainError(f"output dimension must be positive, got {d}")
    mix = rho_t / d + (d - 1) / d * omega
    r1 = robustness(omega, model, dims, options)
    r2 = r1 if d == 1 and np.allclose(mix, omega) else robustness(mix, model, dims, options)
    cert = {
        "robustness_omega": r1.value,
        "robustness_mix": r2.value,
        "sigma1": r1.sigma,
        "sigma2": r2.sigma,
        "delta": delta,
    }
    if max(r1.value, r2.value) > delta + DELTA_TOL:
        return MembershipVerdict(OUT, str(model), cert)
    return MembershipVerdict(IN if model.exact_for(dims) else UNKNOWN, str(model), cert)


def lambda_dne_check(d, rho_t, omega, delta, model="ppt", dims=None, options=None):
    """NE conditions plus ``sup_S Tr[sigma rho_t]/Tr[sigma omega] <= d + 1``.

    The ratio condition is block-positivity of ``(d+1) omega - rho_t``.
    """
    rho_t, omega = _as_matrix(rho_t), _as_matrix(omega)
    model = parse_model(model)
    dims = _local_dims(rho_t.shape[0], dims)
    ne = lambda_ne_check(d, rho_t, omega, delta, model, dims, options)
    bp = block_positivity((d + 1) * omega - rho_t, dims, model, options)
    status = _combine([ne, bp])
    return MembershipVerdict(status, str(model), {"ne": ne, "ratio": bp})
