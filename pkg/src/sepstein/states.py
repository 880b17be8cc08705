"""Named bipartite states and the two twirling projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .linalg import BipartiteState, as_hermitian

MAXENT = "maxent"
TAU = "tau"
ISOTROPIC = "isotropic"
ANTISYM = "antisym"
SYMWERNER = "symwerner"
WERNER = "werner"

KINDS = (MAXENT, TAU, ISOTROPIC, ANTISYM, SYMWERNER, WERNER)


def swap(d):
    """The flip operator F|ij> = |ji> on C^d (x) C^d."""
    f = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            f[j * d + i, i * d + j] = 1.0
    return f


def max_entangled(d):
    """Projector onto (1/sqrt d) sum_i |ii>, as a matrix."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1 / np.sqrt(d)
    return np.outer(v, v.conj())


def diag_projector(d):
    """P = sum_i |ii><ii|."""
    p = np.zeros((d * d, d * d), dtype=complex)
    idx = np.arange(d) * (d + 1)
    p[idx, idx] = 1.0
    return p


def antisym_matrix(d):
    return (np.eye(d * d) - swap(d)) / (d * (d - 1))


def symwerner_matrix(d):
    return (np.eye(d * d) + swap(d)) / (d * (d + 1))


def tau_matrix(d):
    return (np.eye(d * d) - max_entangled(d)) / (d * d - 1)


@dataclass(frozen=True)
class NamedState:
    kind: str
    d: int
    p: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown state kind {self.kind!r}")
        if self.d < 2:
            raise DomainError(f"local dimension must be at least 2, got {self.d}")
        if self.kind in (ISOTROPIC, WERNER):
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise DomainError(f"{self.kind} needs p in [0, 1], got {self.p}")


def make_state(spec):
    """Build the density matrix for a :class:`NamedState`.

    ``isotropic(p) = p Phi_d + (1-p) tau_d`` and ``werner(p) = p alpha_d + (1-p) sigma_d``.
    """
    d = spec.d
    if spec.kind == MAXENT:
        m = max_entangled(d)
    elif spec.kind == TAU:
        m = tau_matrix(d)
    elif spec.kind == ISOTROPIC:
        m = spec.p * max_entangled(d) + (1 - spec.p) * tau_matrix(d)
    elif spec.kind == ANTISYM:
        m = antisym_matrix(d)
    elif spec.kind == SYMWERNER:
        m = symwerner_matrix(d)
    else:
        m = spec.p * antisym_matrix(d) + (1 - spec.p) * symwerner_matrix(d)
    return BipartiteState(m, d, d)


def isotropic(d, p):
    return make_state(NamedState(ISOTROPIC, d, p))


def werner(d, p):
    return make_state(NamedState(WERNER, d, p))


def antisym(d):
    return make_state(NamedState(ANTISYM, d))


def symwerner(d):
    return make_state(NamedState(SYMWERNER, d))


def maxent(d):
    return make_state(NamedState(MAXENT, d))


def _square_local_dim(x):
    n = x.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n or x.shape != (n, n):
        raise ShapeError(f"expected a d^2 x d^2 matrix, got shape {x.shape}")
    return d


def _coerce(x, d=None):
    x = np.asarray(x, dtype=complex)
    d0 = _square_local_dim(x)
    if d is not None and d != d0:
        raise ShapeError(f"matrix of dimension {x.shape[0]} is not {d}x{d}")
    return x, d0


def twirl(x, d=None):
    """Isotropic (U (x) U*) twirl: Phi Tr[x Phi] + tau Tr[x (1 - Phi)]."""
    x, d = _coerce(x, d)
    phi = max_entangled(d)
    a = np.trace(x @ phi)
    return phi * a + tau_matrix(d) * (np.trace(x) - a)


def werner_twirl(x, d=None):
    """Werner (U (x) U) twirl: alpha Tr[x(1-F)/2] + sigma Tr[x(1+F)/2]."""
    x, d = _coerce(x, d)
    f = np.trace(x @ swap(d))
    tr = np.trace(x)
    return antisym_matrix(d) * (tr - f) / 2 + symwerner_matrix(d) * (tr + f) / 2


def twirl_deviation(x, kind):
    """Frobenius distance between ``x`` and its twirl of the given kind."""
    x = np.asarray(x, dtype=complex)
    t = twirl(x) if kind == ISOTROPIC else werner_twirl(x)
    return float(np.linalg.norm(t - x))


# ---------------------------------------------------------------------------
# Channels

TWIRL = "twirl"
WERNER_TWIRL = "werner_twirl"
THETA = "theta"
LAMBDA = "lambda"


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """One of the four named channels.

    ``theta``: X -> Phi_d Tr[E X] + tau_d Tr[(1-E) X]  (distillation form).
    ``lambda``: X -> rho_t Tr[X Phi_d] + omega Tr[X (1 - Phi_d)]  (dilution form).
    """

    kind: str
    d: int
    E: np.ndarray | None = None
    rho_t: np.ndarray | None = None
    omega: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == THETA:
            e = as_hermitian(self.E)
            w = np.linalg.eigvalsh(e)
            if w[0] < -1e-9 or w[-1] > 1 + 1e-9:
                raise DomainError("test operator must satisfy 0 <= E <= 1")
            object.__setattr__(self, "E", e)
        elif self.kind == LAMBDA:
            for name in ("rho_t", "omega"):
                st = getattr(self, name)
                st = st.matrix if isinstance(st, BipartiteState) else st
                object.__setattr__(self, name, BipartiteState.from_matrix(st).matrix)
        elif self.kind not in (TWIRL, WERNER_TWIRL):
            raise DomainError(f"unknown channel kind {self.kind!r}")

    @property
    def input_dim(self):
        if self.kind == THETA:
            return self.E.shape[0]
        return self.d * self.d

    @property
    def output_dim(self):
        if self.kind == LAMBDA:
            return self.rho_t.shape[0]
        return self.d * self.d


def apply_channel(spec, x):
    x = np.asarray(x, dtype=complex)
    if x.shape != (spec.input_dim, spec.input_dim):
        raise ShapeError(f"channel input must be {spec.input_dim}-dimensional, got {x.shape}")
    d = spec.d
    if spec.kind == TWIRL:
        return twirl(x, d)
    if spec.kind == WERNER_TWIRL:
        return werner_twirl(x, d)
    if spec.kind == THETA:
        a = np.trace(spec.E @ x)
        return max_entangled(d) * a + tau_matrix(d) * (np.trace(x) - a)
    phi = max_entangled(d)
    a = np.trace(x @ phi)
    return spec.rho_t * a + spec.omega * (np.trace(x) - a)


def adjoint_channel(spec, y):
    """The adjoint map with Tr[Y N(X)] = Tr[N^dag(Y) X]."""
    y = np.asarray(y, dtype=complex)
    if y.shape != (spec.output_dim, spec.output_dim):
        raise ShapeError(f"adjoint input must be {spec.output_dim}-dimensional, got {y.shape}")
    d = spec.d
    if spec.kind in (TWIRL, WERNER_TWIRL):
        # both twirls are orthogonal projections, hence self-adjoint
        return apply_channel(spec, y)
    if spec.kind == THETA:
        a, b = np.trace(y @ max_entangled(d)), np.trace(y @ tau_matrix(d))
        ident = np.eye(spec.input_dim)
        return spec.E * a + (ident - spec.E) * b
    phi = max_entangled(d)
    a, b = np.trace(y @ spec.rho_t), np.trace(y @ spec.omega)
    return phi * a + (np.eye(d * d) - phi) * b
