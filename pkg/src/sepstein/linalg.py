"""Dense Hermitian matrix algebra on bipartite systems.

Matrices are plain complex ``numpy`` arrays; validation helpers return
read-only copies so that values stay immutable once constructed.  Bipartite
states carry their A:B split in :class:`BipartiteState`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg as sla

from .errors import DomainError, NumericError, ShapeError, SizeError

HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
DEFAULT_MAX_DIM = 256


def _frozen(x):
    x = np.array(x, dtype=complex)
    x.flags.writeable = False
    return x


def _check_cap(n, max_dim):
    cap = DEFAULT_MAX_DIM if max_dim is None else max_dim
    if n > cap:
        raise SizeError(f"matrix dimension {n} exceeds cap {cap}")


def as_hermitian(x, tol=HERM_TOL, max_dim=None):
    """Validate and symmetrize ``x`` into a read-only Hermitian array.

    Inputs whose anti-Hermitian part exceeds ``tol`` in max-norm are rejected;
    otherwise ``(x + x^H)/2`` is returned.
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("matrix has non-finite entries")
    _check_cap(x.shape[0], max_dim)
    dev = np.max(np.abs(x - x.conj().T)) if x.size else 0.0
    if dev > tol:
        raise DomainError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return _frozen((x + x.conj().T) / 2)


def eig_h(x):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    x = np.asarray(x, dtype=complex)
    try:
        w, v = np.linalg.eigh(x)
    except np.linalg.LinAlgError as exc:
        w, v = sla.eigh(x, driver="ev")
        if not np.all(np.isfinite(w)):
            raise NumericError(f"eigendecomposition failed: {exc}") from exc
    n = x.shape[0]
    err = np.linalg.norm(x - (v * w) @ v.conj().T)
    if err > 1e-9 * max(n, 1) * max(1.0, np.linalg.norm(x)):
        raise NumericError(f"eigendecomposition reconstruction error {err:.3e}")
    return w, v


def min_eig(x):
    return float(np.linalg.eigvalsh(np.asarray(x, dtype=complex))[0])


def psd_part(x, tol=PSD_TOL):
    """Clip eigenvalues in ``[-tol, 0]`` to zero; reject anything more negative."""
    w, v = eig_h(x)
    if w[0] < -tol:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def psd_sqrt(x, tol=PSD_TOL):
    w, v = eig_h(x)
    if w[0] < -tol:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def tensor(*mats, max_dim=None):
    """Kronecker product of one or more square matrices."""
    if not mats:
        raise ShapeError("tensor needs at least one factor")
    n = reduce(lambda acc, m: acc * np.shape(m)[0], mats, 1)
    _check_cap(n, max_dim)
    return reduce(np.kron, [np.asarray(m, dtype=complex) for m in mats])


def _check_dims(x, dims):
    da, db = dims
    if da < 1 or db < 1 or x.shape != (da * db, da * db):
        raise ShapeError(f"shape {x.shape} does not match dims {tuple(dims)}")


def partial_transpose(x, dims, sys=1):
    """Transpose subsystem ``sys`` (0 for A, 1 for B) of a bipartite operator."""
    x = np.asarray(x, dtype=complex)
    _check_dims(x, dims)
    da, db = dims
    t = x.reshape(da, db, da, db)
    t = t.transpose(0, 3, 2, 1) if sys == 1 else t.transpose(2, 1, 0, 3)
    return t.reshape(da * db, da * db)


def partial_trace(x, dims, keep="A"):
    """Trace out one side of a bipartite operator, keeping ``keep``."""
    x = np.asarray(x, dtype=complex)
    _check_dims(x, dims)
    da, db = dims
    t = x.reshape(da, db, da, db)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise DomainError(f"keep must be 'A' or 'B', got {keep!r}")


def permute_subsystems(x, dims, perm):
    """Reorder tensor factors of ``x``; factor ``perm[k]`` moves to slot ``k``."""
    x = np.asarray(x, dtype=complex)
    dims = list(dims)
    n = int(np.prod(dims))
    if x.shape != (n, n) or sorted(perm) != list(range(len(dims))):
        raise ShapeError(f"cannot permute shape {x.shape} with dims {dims} by {perm}")
    k = len(dims)
    t = x.reshape(dims + dims)
    t = t.transpose(list(perm) + [k + p for p in perm])
    return t.reshape(n, n)


def trace_norm(x):
    x = np.asarray(x, dtype=complex)
    if np.allclose(x, x.conj().T, atol=1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh((x + x.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def _subnormalized(x, name):
    x = as_hermitian(x)
    if min_eig(x) < -PSD_TOL:
        raise DomainError(f"{name} is not positive semidefinite")
    tr = float(np.real(np.trace(x)))
    if tr > 1 + TRACE_TOL:
        raise DomainError(f"{name} has trace {tr} > 1")
    return x, min(tr, 1.0)


def fidelity(rho, sigma):
    """Generalized fidelity of two subnormalized states.

    F = (||sqrt(rho) sqrt(sigma)||_1 + sqrt((1 - Tr rho)(1 - Tr sigma)))^2.
    """
    rho, tr_r = _subnormalized(rho, "rho")
    sigma, tr_s = _subnormalized(sigma, "sigma")
    overlap = np.sum(np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False))
    f = (overlap + np.sqrt(max(0.0, (1 - tr_r) * (1 - tr_s)))) ** 2
    return float(min(max(f, 0.0), 1.0))


def purified_distance(rho, sigma):
    return float(np.sqrt(max(0.0, 1.0 - fidelity(rho, sigma))))


def gen_trace_distance(rho, sigma):
    """Trace distance extended to subnormalized states."""
    rho, tr_r = _subnormalized(rho, "rho")
    sigma, tr_s = _subnormalized(sigma, "sigma")
    return 0.5 * trace_norm(rho - sigma) + 0.5 * abs(tr_r - tr_s)


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """A density matrix together with its A:B split."""

    matrix: np.ndarray
    dim_a: int
    dim_b: int

    def __post_init__(self):
        m = as_hermitian(self.matrix)
        if m.shape[0] != self.dim_a * self.dim_b:
            raise ShapeError(
                f"dimension {m.shape[0]} != dim_a*dim_b = {self.dim_a}*{self.dim_b}"
            )
        tr = float(np.real(np.trace(m)))
        if abs(tr - 1) > TRACE_TOL:
            raise DomainError(f"state has trace {tr}, expected 1")
        lo = min_eig(m)
        if lo < -PSD_TOL:
            raise DomainError(f"state has negative eigenvalue {lo:.3e}")
        if lo < 0:
            m = _frozen(psd_part(m))
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self):
        return (self.dim_a, self.dim_b)

    @property
    def dim(self):
        return self.dim_a * self.dim_b

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def pt(self):
        return partial_transpose(self.matrix, self.dims)

    @classmethod
    def from_matrix(cls, matrix, dims=None):
        matrix = np.asarray(matrix, dtype=complex)
        if dims is None:
            d = int(round(np.sqrt(matrix.shape[0])))
            if d * d != matrix.shape[0]:
                raise ShapeError("dims are required for non-square total dimension")
            dims = (d, d)
        return cls(matrix, int(dims[0]), int(dims[1]))


def as_state(x, dims=None):
    if isinstance(x, BipartiteState):
        return x
    return BipartiteState.from_matrix(x, dims)


def random_state(dim_a, dim_b, rng, rank=None):
    """Hilbert-Schmidt (Ginibre) random state G G^H / Tr."""
    n = dim_a * dim_b
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = g @ g.conj().T
    return BipartiteState(rho / np.real(np.trace(rho)), dim_a, dim_b)


def matrix_to_dict(x):
    x = np.asarray(x, dtype=complex)
    return {
        "dim": int(x.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in x.ravel()],
    }


def matrix_from_dict(obj):
    n = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != n * n:
        raise ShapeError(f"expected {n * n} entries, got {len(entries)}")
    arr = np.array([complex(re, im) for re, im in entries]).reshape(n, n)
    return arr


def state_to_dict(state):
    out = matrix_to_dict(state.matrix)
    out["dimA"], out["dimB"] = state.dim_a, state.dim_b
    return out


def state_from_dict(obj):
    arr = matrix_from_dict(obj)
    if "dimA" in obj:
        return BipartiteState(arr, int(obj["dimA"]), int(obj["dimB"]))
    return BipartiteState.from_matrix(arr)


def dumps_matrix(x):
    return json.dumps(matrix_to_dict(x))


def loads_matrix(text):
    return matrix_from_dict(json.loads(text))
