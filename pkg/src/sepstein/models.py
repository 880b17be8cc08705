"""Tractable stand-ins for the separable cone.

``PPT`` and ``DPS(k)`` are outer relaxations.  The Werner and isotropic
families are exact descriptions of the twirled separable set and are only
admissible for twirl-invariant problem data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .conic import Affine, Model, require_optimal
from .errors import DomainError
from .linalg import as_state, min_eig, partial_transpose
from .states import (
    ISOTROPIC,
    antisym_matrix,
    max_entangled,
    symwerner_matrix,
    tau_matrix,
    twirl_deviation,
)

PPT = "ppt"
DPS = "dps"
WERNER_EXACT = "werner"
ISOTROPIC_EXACT = "isotropic"

OUTER = "outer"
EXACT = "exact"

IN, OUT, UNKNOWN = "In", "Out", "Unknown"

MAX_DPS_LEVEL = 3
INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class SeparabilityModel:
    kind: str = PPT
    k: int = 0

    def __post_init__(self):
        if self.kind not in (PPT, DPS, WERNER_EXACT, ISOTROPIC_EXACT):
            raise DomainError(f"unknown separability model {self.kind!r}")
        if self.kind == DPS and not 2 <= self.k <= MAX_DPS_LEVEL:
            raise DomainError(f"DPS level must be in [2, {MAX_DPS_LEVEL}], got {self.k}")

    @classmethod
    def parse(cls, text):
        text = text.strip().lower()
        if text.startswith("dps:"):
            try:
                k = int(text[4:])
            except ValueError as exc:
                raise DomainError(f"bad DPS level in {text!r}") from exc
            return cls(DPS, k)
        return cls(text)

    def __str__(self):
        return f"dps:{self.k}" if self.kind == DPS else self.kind

    @property
    def direction(self):
        return EXACT if self.kind in (WERNER_EXACT, ISOTROPIC_EXACT) else OUTER

    @property
    def is_family(self):
        return self.direction == EXACT

    def exact_for(self, dims):
        """Whether the model coincides with the separable set on ``dims``.

        Outer models are exact on 2x2 and 2x3, where PPT equals separable.
        Exact families are exact on their (invariant) domain.
        """
        if self.is_family:
            return True
        return tuple(sorted(dims)) in ((2, 2), (2, 3))

    def family_kind(self):
        return ISOTROPIC if self.kind == ISOTROPIC_EXACT else "werner"

    def generators(self, d):
        """Extreme rays of the family cone (states)."""
        if self.kind == WERNER_EXACT:
            s = symwerner_matrix(d)
            return [s, (antisym_matrix(d) + s) / 2]
        if self.kind == ISOTROPIC_EXACT:
            t = tau_matrix(d)
            return [t, max_entangled(d) / d + (d - 1) / d * t]
        raise DomainError(f"{self} has no finite generator set")


def parse_model(model):
    if isinstance(model, SeparabilityModel):
        return model
    return SeparabilityModel.parse(model)


def check_admissible(model, dims, *mats):
    """Enforce the preconditions for using ``model`` with data ``mats``."""
    model = parse_model(model)
    if model.is_family:
        if dims[0] != dims[1]:
            raise DomainError(f"{model} needs equal local dimensions, got {dims}")
        for m in mats:
            dev = twirl_deviation(m, model.family_kind())
            if dev > INVARIANCE_TOL:
                raise DomainError(
                    f"{model} is only exact for twirl-invariant data (deviation {dev:.2e})"
                )
    return model


def sym_isometry(d, k):
    """Isometry from the symmetric subspace of (C^d)^{(x)k} into the full space."""
    cols = []
    for combo in itertools.combinations_with_replacement(range(d), k):
        v = np.zeros(d**k)
        for perm in set(itertools.permutations(combo)):
            v[int(np.ravel_multi_index(perm, (d,) * k))] = 1.0
        cols.append(v / np.linalg.norm(v))
    return np.array(cols).T


def dps_extension_dim(dims, k):
    da, db = dims
    return da * math.comb(db + k - 1, k)


@dataclass
class ConeConstraint:
    """A model-cone membership emitted into a :class:`Model`.

    ``expr`` is the member (an affine matrix on A:B); ``blocks`` lists the
    cone blocks that were added, as ``(kind, size)`` pairs.
    """

    expr: Affine
    blocks: list = field(default_factory=list)
    weights: list = field(default_factory=list)


def cone_constraint(m, model, dims, real=False):
    """Add a fresh variable constrained to ``cone(model)`` on ``dims`` to ``m``."""
    model = parse_model(model)
    da, db = dims
    n = da * db
    if model.kind == PPT:
        x = m.herm(n, real=real, psd=True)
        m.psd(x.pt(dims))
        return ConeConstraint(x, [("psd", n), ("psd", n)])
    if model.kind == DPS:
        k = model.k
        v = np.kron(np.eye(da), sym_isometry(db, k))
        ext = v.shape[1]
        y = m.herm(ext, real=real, psd=True)
        big = v @ y @ v.T
        blocks = [("psd", ext)]
        for j in range(1, k + 1):
            cut = (da * db ** (k - j), db**j)
            m.psd(big.pt(cut))
            blocks.append(("psd", da * db**k))
        x = big.ptrace((n, db ** (k - 1)), keep="A") if k > 1 else big
        return ConeConstraint(x, blocks)
    if da != db:
        raise DomainError(f"{model} needs equal local dimensions, got {dims}")
    gens = model.generators(da)
    ws = [m.scalar(nonneg=True) for _ in gens]
    x = sum((w.kron(g) for w, g in zip(ws, gens)), Affine(n))
    return ConeConstraint(x, [("nonneg", len(gens))], ws)


def dual_cone_constraint(m, w, model, dims, real=False):
    """Constrain the affine matrix ``w`` to the dual cone of ``cone(model)``.

    PPT: ``w = P + Q^T_B`` with P, Q PSD.  DPS(k): ``V^H (w (x) 1) V`` minus
    partially transposed PSD terms is PSD.  Families: nonnegative on generators
    (valid for invariant ``w``).
    """
    model = parse_model(model)
    da, db = dims
    n = da * db
    if model.kind == PPT:
        p = m.herm(n, real=real, psd=True)
        q = m.herm(n, real=real, psd=True)
        m.eq(w - p - q.pt(dims), 0.0)
        return
    if model.kind == DPS:
        k = model.k
        v = np.kron(np.eye(da), sym_isometry(db, k))
        rest = db ** (k - 1)
        lhs = v.T @ w.kron(np.eye(rest)) @ v
        for j in range(1, k + 1):
            cut = (da * db ** (k - j), db**j)
            z = m.herm(da * db**k, real=real, psd=True)
            lhs = lhs - v.T @ z.pt(cut) @ v
        m.psd(lhs)
        return
    for g in model.generators(da):
        m.nonneg(w.inner(g))


def _real_data(*mats):
    return all(not np.any(np.abs(np.asarray(x).imag) > 0) for x in mats)


@dataclass
class OverlapResult:
    value: float
    sigma: np.ndarray
    model: SeparabilityModel
    exact_for_s: bool = False
    result: object = field(repr=False, default=None)


def max_overlap(E, model, dims, options=None, strict=True):
    """``max Tr[E sigma]`` over unit-trace members of the model cone.

    For an exact family and non-invariant ``E`` the value is the optimum over
    the family itself, not over the separable set; ``strict`` rejects that
    case, otherwise ``exact_for_s`` records it.
    """
    model = parse_model(model)
    E = np.asarray(E, dtype=complex)
    invariant = True
    if strict:
        check_admissible(model, dims, E)
    elif model.is_family:
        check_admissible(model, dims)
        invariant = twirl_deviation(E, model.family_kind()) <= INVARIANCE_TOL
    m = Model()
    cc = cone_constraint(m, model, dims, real=_real_data(E))
    m.eq(cc.expr.trace(), 1.0)
    m.maximize(cc.expr.inner(E))
    res = require_optimal(m.solve(options), f"max overlap under {model}")
    sigma = res.value_of(cc.expr)
    exact = model.exact_for(dims) and invariant
    return OverlapResult(float(res.value), (sigma + sigma.conj().T) / 2, model, exact, res)


@dataclass
class MembershipVerdict:
    status: str
    model: str
    certificate: dict | None = None

    def to_dict(self):
        cert = None
        if self.certificate is not None:
            cert = {
                k: (v.tolist() if isinstance(v, np.ndarray) and v.dtype != complex else v)
                for k, v in self.certificate.items()
                if not isinstance(v, np.ndarray) or v.dtype != complex
            }
        return {"status": self.status, "model": self.model, "certificate": cert}


def _witness_verdict(model, dims, w, rho, value):
    return MembershipVerdict(
        OUT, str(model), {"witness": w, "witness_value": float(np.real(np.trace(w @ rho))),
                          "distance": value, "dims": tuple(dims)}
    )


def separability_test(rho, model=PPT, dims=None, options=None, tol=1e-9):
    """Decide membership of ``rho`` in the model's state set.

    ``Out`` carries a dual witness W (in the model's dual cone, Tr W = 1,
    Tr[W rho] < 0).  ``In`` is conclusive for separability only where the
    model is exact; otherwise it is reported as ``Unknown`` with the
    relaxation certificate attached.
    """
    model = parse_model(model)
    st = as_state(rho, dims)
    dims = st.dims
    x = st.matrix
    check_admissible(model, dims, x)
    if model.kind == PPT:
        xg = partial_transpose(x, dims)
        w, v = np.linalg.eigh(xg)
        if w[0] < -tol:
            vec = v[:, 0]
            wit = partial_transpose(np.outer(vec, vec.conj()), dims)
            return _witness_verdict(model, dims, wit, x, float(-w[0]))
        status = IN if model.exact_for(dims) else UNKNOWN
        return MembershipVerdict(status, str(model), {"pt_min_eig": float(w[0])})
    # distance-to-cone program: min t s.t. rho + t 1 in cone(model)
    m = Model()
    real = _real_data(x)
    cc = cone_constraint(m, model, dims, real=real)
    t = m.scalar()
    h = m.eq(cc.expr - t.kron(np.eye(st.dim)), x)
    m.minimize(t)
    res = require_optimal(m.solve(options), f"separability test under {model}")
    tval = res.value
    if tval > tol:
        wit = -res.dual(h)
        wit = wit / np.real(np.trace(wit))
        return _witness_verdict(model, dims, wit, x, tval)
    status = IN if model.exact_for(dims) else UNKNOWN
    cert = {"distance": float(tval)}
    if model.is_family:
        cert["weights"] = [float(res.value_of(wt)) for wt in cc.weights]
    return MembershipVerdict(status, str(model), cert)


def is_block_positive_sufficient(w, dims, options=None):
    """Decomposability test ``w = P + Q^T_B`` (sufficient for block positivity)."""
    w = np.asarray(w, dtype=complex)
    m = Model()
    real = _real_data(w)
    t = m.scalar()
    n = w.shape[0]
    dual_cone_constraint(m, Affine.constant(w) + t.kron(np.eye(n)), PPT, dims, real=real)
    m.minimize(t)
    res = require_optimal(m.solve(options), "decomposability test")
    return res.value, res


def product_min(w, dims, rng=None, restarts=20, iters=200):
    """Seesaw search for ``min <a b| w |a b>`` over unit product vectors.

    The returned value is attained by the returned vectors, so a negative
    value is a conclusive certificate that ``w`` is not block-positive.
    """
    w = np.asarray(w, dtype=complex)
    da, db = dims
    rng = np.random.default_rng(0) if rng is None else rng
    t = w.reshape(da, db, da, db)
    best = (np.inf, None, None)
    for _ in range(restarts):
        b = rng.standard_normal(db) + 1j * rng.standard_normal(db)
        b /= np.linalg.norm(b)
        prev = np.inf
        for _ in range(iters):
            wa = np.einsum("ijkl,j,l->ik", t, b.conj(), b)
            ev, vec = np.linalg.eigh((wa + wa.conj().T) / 2)
            a = vec[:, 0]
            wb = np.einsum("ijkl,i,k->jl", t, a.conj(), a)
            ev, vec = np.linalg.eigh((wb + wb.conj().T) / 2)
            b = vec[:, 0]
            if prev - ev[0] < 1e-14:
                break
            prev = ev[0]
        pv = np.kron(a, b)
        val = float(np.real(pv.conj() @ w @ pv))
        if val < best[0]:
            best = (val, a, b)
    return best


def block_positivity(w, dims, model=PPT, options=None, tol=1e-9):
    """Three-valued test that ``Tr[w sigma] >= 0`` for every separable sigma.

    Exact families reduce to the generator inequalities (for invariant w).
    Otherwise decomposability gives ``In``, a negative product expectation
    gives ``Out``, and disagreement gives ``Unknown``; on 2x2 and 2x3 every
    block-positive operator is decomposable, so the verdict is conclusive.
    """
    model = parse_model(model)
    w = np.asarray(w, dtype=complex)
    if model.is_family:
        check_admissible(model, dims, w)
        vals = [float(np.real(np.trace(w @ g))) for g in model.generators(dims[0])]
        if min(vals) >= -tol:
            return MembershipVerdict(IN, str(model), {"generator_values": vals})
        g = model.generators(dims[0])[int(np.argmin(vals))]
        return MembershipVerdict(OUT, str(model), {"violator": g, "value": min(vals)})
    shift, _ = is_block_positive_sufficient(w, dims, options)
    if shift <= tol:
        return MembershipVerdict(IN, str(model), {"decomposable_shift": float(shift)})
    val, a, b = product_min(w, dims)
    if val < -tol:
        return MembershipVerdict(OUT, str(model), {"product_value": val, "a": a, "b": b})
    if model.exact_for(dims):
        # decomposable equals block positive here; the shift bounds the violation
        return MembershipVerdict(OUT, str(model), {"decomposable_shift": float(shift)})
    return MembershipVerdict(UNKNOWN, str(model), {"decomposable_shift": float(shift),
                                                   "product_value": val})


def psd_verdict(x, tol=1e-9):
    return min_eig(x) >= -tol


@dataclass
class RobustnessSolve:
    """``R = min r`` with ``x <= (1+r) sigma``, sigma in the model's state set."""

    value: float
    sigma: np.ndarray
    dual_witness: np.ndarray
    model: SeparabilityModel
    result: object = field(repr=False, default=None)


def robustness(x, model, dims, options=None):
    """Generalized robustness of a PSD operator against the model.

    Solved as ``min Tr Y`` over ``Y`` in the model cone with ``Y >= x``; then
    ``1 + R = Tr Y*`` and ``sigma = Y*/Tr Y*``.  The multiplier W of ``Y >= x``
    is PSD with ``1 - W`` in the dual cone, so ``Tr[W x]`` lower-bounds
    ``1 + R``.
    """
    model = parse_model(model)
    x = np.asarray(x, dtype=complex)
    check_admissible(model, dims, x)
    m = Model()
    cc = cone_constraint(m, model, dims, real=_real_data(x))
    h = m.psd(cc.expr - x)
    m.minimize(cc.expr.trace())
    res = require_optimal(m.solve(options), f"robustness under {model}")
    y = res.value_of(cc.expr)
    tr = float(np.real(np.trace(y)))
    sigma = (y + y.conj().T) / (2 * tr)
    return RobustnessSolve(max(tr - 1.0, 0.0), sigma, res.dual(h), model, res)
