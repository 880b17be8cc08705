"""Dense conic programs over Hermitian PSD blocks and the nonnegative orthant.

Programs are written with :class:`Model`, a small affine-expression builder.
Complex Hermitian matrix inequalities are embedded as real symmetric blocks
``[[Re M, -Im M], [Im M, Re M]]`` (blocks with purely real data stay real), and
the compiled :class:`ConicProblem` is handed to CVXOPT's ``conelp``, a
primal-dual path-following method with Nesterov-Todd scaling whose
infeasibility detection comes from a homogeneous self-dual embedding.

Every result is re-certified here: primal/dual residuals, cone membership of
both iterates and the relative duality gap are recomputed from the raw
vectors, and the status reflects that check rather than the backend's own
verdict.
"""

from __future__ import annotations

import contextlib
import json
import threading
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers
from scipy import linalg as sla

from .errors import NumericError, ShapeError

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
ITER_LIMIT = "IterLimit"
NUMERICAL = "Numerical"


@dataclass(frozen=True)
class SolveOptions:
    """``tol`` is the backend's stopping tolerance; ``gap_tol`` and ``feas_tol``
    are what an Optimal result is certified against."""

    tol: float = 1e-8
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200


DEFAULT_OPTIONS = SolveOptions()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(eq=False)
class Variable:
    kind: str  # "herm", "sym", "gen", "rgen", "scalar"
    n: int
    size: int
    offset: int
    name: str = ""

    def basis(self):
        n = self.n
        if self.kind == "scalar":
            return np.ones((1, 1, 1), dtype=complex)
        b = np.zeros((n, n, self.size), dtype=complex)
        if self.kind in ("gen", "rgen"):
            # general square matrix: real parts, then imaginary parts
            eye = np.eye(n * n).reshape(n, n, n * n)
            b[:, :, : n * n] = eye
            if self.kind == "gen":
                b[:, :, n * n :] = 1j * eye
            return b
        k = 0
        for i in range(n):
            b[i, i, k] = 1.0
            k += 1
        for i in range(n):
            for j in range(i + 1, n):
                b[i, j, k] = b[j, i, k] = 1.0
                k += 1
                if self.kind == "herm":
                    b[i, j, k] = 1j
                    b[j, i, k] = -1j
                    k += 1
        return b


class Affine:
    """An affine map from the decision vector to ``n x n`` complex matrices.

    Scalars are ``1 x 1``.  Coefficients are stored per variable with a
    trailing axis over that variable's real parameters.
    """

    __slots__ = ("n", "const", "terms")
    __array_ufunc__ = None  # make numpy defer to __rmatmul__ and friends

    def __init__(self, n, const=None, terms=None):
        self.n = n
        self.const = np.zeros((n, n), dtype=complex) if const is None else const
        self.terms = {} if terms is None else terms

    # construction helpers -------------------------------------------------
    @staticmethod
    def constant(value):
        value = np.asarray(value, dtype=complex)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        return Affine(value.shape[0], value.copy())

    def _lift(self, other):
        if isinstance(other, Affine):
            return other
        other = np.asarray(other, dtype=complex)
        if other.ndim == 0:
            if self.n != 1:
                raise ShapeError("cannot add a scalar to a matrix expression")
            other = other.reshape(1, 1)
        return Affine.constant(other)

    def _map(self, f, n_out):
        const = f(self.const[..., None])[..., 0]
        terms = {v: f(c) for v, c in self.terms.items()}
        return Affine(n_out, const, terms)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        if other.n != self.n:
            raise ShapeError(f"dimension mismatch {self.n} vs {other.n}")
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms[v] + c if v in terms else c
        return Affine(self.n, self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, s):
        if isinstance(s, Affine):
            raise TypeError("expressions are affine; products are not supported")
        s = complex(s)
        return Affine(self.n, self.const * s, {v: c * s for v, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def __rmatmul__(self, a):
        a = np.asarray(a, dtype=complex)
        return self._map(lambda t: np.einsum("ij,jkm->ikm", a, t), a.shape[0])

    def __matmul__(self, b):
        b = np.asarray(b, dtype=complex)
        return self._map(lambda t: np.einsum("ijm,jk->ikm", t, b), b.shape[1])

    # structure ------------------------------------------------------------
    @property
    def H(self):
        """Conjugate transpose."""
        return self._map(lambda t: t.conj().transpose(1, 0, 2), self.n)

    def conj_by(self, v):
        """``V^H X V``."""
        v = np.asarray(v, dtype=complex)
        return v.conj().T @ self @ v

    def kron(self, c):
        """``X (x) C``."""
        c = np.asarray(c, dtype=complex)
        n, m = self.n, c.shape[0]
        return self._map(
            lambda t: np.einsum("ijk,ab->iajbk", t, c).reshape(n * m, n * m, -1), n * m
        )

    def rkron(self, c):
        """``C (x) X``."""
        c = np.asarray(c, dtype=complex)
        n, m = self.n, c.shape[0]
        return self._map(
            lambda t: np.einsum("ab,ijk->aibjk", c, t).reshape(n * m, n * m, -1), n * m
        )

    def pt(self, dims, sys=1):
        da, db = dims
        if da * db != self.n:
            raise ShapeError(f"dims {dims} do not match dimension {self.n}")

        def f(t):
            r = t.reshape(da, db, da, db, -1)
            r = r.transpose(0, 3, 2, 1, 4) if sys == 1 else r.transpose(2, 1, 0, 3, 4)
            return r.reshape(self.n, self.n, -1)

        return self._map(f, self.n)

    def ptrace(self, dims, keep="A"):
        da, db = dims
        if da * db != self.n:
            raise ShapeError(f"dims {dims} do not match dimension {self.n}")
        if keep == "A":
            return self._map(lambda t: np.einsum("ijkjm->ikm", t.reshape(da, db, da, db, -1)), da)
        return self._map(lambda t: np.einsum("ijilm->jlm", t.reshape(da, db, da, db, -1)), db)

    def permute(self, dims, perm):
        dims = list(dims)
        k = len(dims)

        def f(t):
            r = t.reshape(dims + dims + [-1])
            r = r.transpose(list(perm) + [k + p for p in perm] + [2 * k])
            return r.reshape(self.n, self.n, -1)

        return self._map(f, self.n)

    def trace(self):
        return self._map(lambda t: np.einsum("iik->k", t)[None, None, :], 1)

    def inner(self, c):
        """Real part of ``Tr[C X]``."""
        c = np.asarray(c, dtype=complex)
        return self._map(lambda t: np.einsum("ij,jik->k", c, t)[None, None, :].real + 0j, 1)

    def entry(self, i, j):
        return self._map(lambda t: t[i : i + 1, j : j + 1, :], 1)

    def value(self, x):
        out = self.const.copy()
        for v, c in self.terms.items():
            out = out + c @ x[v.offset : v.offset + v.size]
        return out

    def is_real(self):
        if np.any(np.abs(self.const.imag) > 0):
            return False
        return all(not np.any(np.abs(c.imag) > 0) for c in self.terms.values())


# ---------------------------------------------------------------------------
# Compiled problem and results


@dataclass
class ConicProblem:
    """``min c'x  s.t.  G x + s = h,  A x = b,  s in R_+^l x S_+^{n_1} x ...``"""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n_lin: int
    psd_sizes: list
    objective_sign: float = 1.0
    objective_offset: float = 0.0
    # constraint handle -> ("l", row) | ("ld", start, count, U, groups)
    # | ("s", block, complex?, n) | ("eq", rows, n, complex?)
    locations: dict = field(default_factory=dict)
    dropped_eq: tuple = ()

    @property
    def num_vars(self):
        return self.c.shape[0]

    def to_json(self):
        return json.dumps(
            {
                "c": self.c.tolist(),
                "G": self.G.tolist(),
                "h": self.h.tolist(),
                "A": self.A.tolist(),
                "b": self.b.tolist(),
                "dims": {"l": self.n_lin, "s": list(self.psd_sizes)},
            }
        )

    def psd_blocks(self, vec):
        """Split a cone vector into (linear part, list of symmetric blocks)."""
        lin = vec[: self.n_lin]
        blocks, k = [], self.n_lin
        for m in self.psd_sizes:
            blk = vec[k : k + m * m].reshape(m, m)
            blocks.append((blk + blk.T) / 2)
            k += m * m
        return lin, blocks


@dataclass
class SolveResult:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    iterations: int
    residuals: dict
    problem: ConicProblem = field(repr=False, default=None)
    y_full: np.ndarray = field(repr=False, default=None)

    @property
    def optimal(self):
        return self.status == OPTIMAL

    @property
    def value(self):
        """Objective value in the caller's sense (min or max)."""
        p = self.problem
        return p.objective_sign * self.primal_value + p.objective_offset

    def value_of(self, expr):
        v = expr.value(self.x)
        return v[0, 0].real if expr.n == 1 else v

    def dual(self, handle):
        """Lagrange multiplier of a constraint, in the caller's matrix form.

        Multipliers follow the convention ``c + G'z + A'y = 0`` of the
        internal minimization; PSD multipliers are positive semidefinite.
        """
        loc = self.problem.locations[handle]
        if loc[0] == "l":
            return float(self.z[loc[1]])
        if loc[0] == "ld":
            _, start, count, u, groups = loc
            z = self.z[start : start + count]
            weights = np.empty(u.shape[1])
            for g, idx in enumerate(groups):
                weights[idx] = z[g] / len(idx)
            return (u * weights) @ u.conj().T
        if loc[0] == "s":
            _, blocks = self.problem.psd_blocks(self.z)
            blk = blocks[loc[1]]
            if not loc[2]:
                return blk.astype(complex)
            n = loc[3]
            z11, z12, z21, z22 = blk[:n, :n], blk[:n, n:], blk[n:, :n], blk[n:, n:]
            w = (z11 + z22) + 1j * (z21 - z12)
            return (w + w.conj().T) / 2
        _, rows, n, cplx = loc
        yfull = self.y_full[rows]
        if n == 1:
            return float(yfull[0])
        w = np.zeros((n, n), dtype=complex)
        k = 0
        for i in range(n):
            w[i, i] = yfull[k]
            k += 1
        for i in range(n):
            for j in range(i + 1, n):
                w[i, j] += yfull[k] / 2
                w[j, i] += yfull[k] / 2
                k += 1
                if cplx:
                    w[i, j] += 1j * yfull[k] / 2
                    w[j, i] -= 1j * yfull[k] / 2
                    k += 1
        return w

    def summary(self):
        return {
            "status": self.status,
            "primal": self.primal_value,
            "dual": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            **self.residuals,
        }


_log = threading.local()


@contextlib.contextmanager
def solve_log():
    """Collect a summary of every solve run in this thread inside the block."""
    records = []
    stack = getattr(_log, "stack", None)
    if stack is None:
        stack = _log.stack = []
    stack.append(records)
    try:
        yield records
    finally:
        stack.pop()


def _record(result):
    for records in getattr(_log, "stack", []):
        records.append(result.summary())


def _min_eig_blocks(p, vec):
    lin, blocks = p.psd_blocks(vec)
    lo = float(np.min(lin)) if lin.size else np.inf
    for blk in blocks:
        lo = min(lo, float(np.linalg.eigvalsh(blk)[0]))
    return lo


def _certify(p, x, z, y):
    s = p.h - p.G @ x
    pres = np.linalg.norm(p.A @ x - p.b) / (1 + np.linalg.norm(p.b)) if p.A.size else 0.0
    pcone = max(0.0, -_min_eig_blocks(p, s)) / (1 + np.max(np.abs(p.h), initial=0))
    dres = np.linalg.norm(p.G.T @ z + p.A.T @ y + p.c) / (1 + np.linalg.norm(p.c))
    dcone = max(0.0, -_min_eig_blocks(p, z)) / (1 + np.max(np.abs(z), initial=0))
    pval = float(p.c @ x)
    dval = float(-p.h @ z - p.b @ y)
    gap = abs(pval - dval) / (1 + abs(pval) + abs(dval))
    return pval, dval, gap, {
        "primal_residual": float(pres),
        "primal_cone": float(pcone),
        "dual_residual": float(dres),
        "dual_cone": float(dcone),
    }


def verify_infeasibility(p, z, y, tol=1e-7):
    """Check a primal infeasibility ray: ``G'z + A'y = 0``, ``h'z + b'y < 0``, z in cone."""
    scale = max(1e-300, abs(float(p.h @ z + p.b @ y)))
    ray = np.linalg.norm(p.G.T @ z + p.A.T @ y) / scale
    cone = max(0.0, -_min_eig_blocks(p, z)) / scale
    return float(p.h @ z + p.b @ y) < 0 and ray <= tol and cone <= tol


def _ladder(tol):
    """Backend stopping tolerances to try in order; acceptance is by certification."""
    out = []
    for t in (tol, tol / 3, 3 * tol, tol / 10, 10 * tol, 100 * tol):
        if 1e-11 < t < 1e-5 and t not in out:
            out.append(t)
    return out


def solve(p, options=None):
    """Solve a compiled problem; never raises on numerical trouble.

    CVXOPT occasionally breaks down near degenerate optima at tight
    tolerances, so a failed attempt is retried at looser backend tolerances.
    Only results passing the independent certification are reported as
    Optimal or infeasible.
    """
    opts = options or DEFAULT_OPTIONS
    res = best = None
    for attempt, tol in enumerate(_ladder(opts.tol)):
        res = _solve_once(p, opts, tol)
        res.residuals["attempts"] = attempt + 1
        if res.status in (OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE):
            break
        if best is None or _badness(res) < _badness(best):
            best = res
    else:
        res = best
    res.y_full = _expand_y(p, res.y)
    _record(res)
    return res


def _badness(res):
    vals = [v for k, v in res.residuals.items() if k != "attempts" and isinstance(v, float)]
    if not vals or not np.isfinite(res.gap):
        return np.inf
    return max([res.gap] + vals)


def _solve_once(p, opts, tol):
    nvar = p.num_vars
    A = p.A if p.A.size else np.zeros((0, nvar))
    b = p.b if p.b.size else np.zeros(0)
    kw = {
        "dims": {"l": p.n_lin, "q": [], "s": list(p.psd_sizes)},
        "A": cvx_matrix(A) if A.shape[0] else cvx_matrix(0.0, (0, nvar)),
        "b": cvx_matrix(b) if b.shape[0] else cvx_matrix(0.0, (0, 1)),
        "options": {
            "show_progress": False,
            "abstol": tol,
            "reltol": tol,
            "feastol": tol,
            "maxiters": opts.max_iter,
        },
    }
    nan = np.full(nvar, np.nan)
    try:
        sol = cvx_solvers.conelp(cvx_matrix(p.c), cvx_matrix(p.G), cvx_matrix(p.h), **kw)
    except (ValueError, ArithmeticError) as exc:
        return SolveResult(NUMERICAL, np.nan, np.nan, np.inf, nan, nan, nan, 0, {"error": str(exc)}, p)

    def vec(key, n):
        v = sol.get(key)
        return np.zeros(n) if v is None else np.array(v).ravel()

    x = vec("x", nvar)
    z = vec("z", p.G.shape[0])
    y = vec("y", A.shape[0])
    iters = int(sol.get("iterations", 0))
    status = sol["status"]
    if status == "primal infeasible":
        ok = verify_infeasibility(p, z, y)
        return SolveResult(PRIMAL_INFEASIBLE if ok else NUMERICAL, np.inf, np.inf, np.nan,
                           x, z, y, iters, {"certificate_ok": bool(ok)}, p)
    if status == "dual infeasible":
        s = vec("s", p.G.shape[0])
        ok = float(p.c @ x) < 0 and np.linalg.norm(p.G @ x + s) <= 1e-7 * abs(float(p.c @ x))
        return SolveResult(DUAL_INFEASIBLE if ok else NUMERICAL, -np.inf, -np.inf, np.nan,
                           x, z, y, iters, {"certificate_ok": bool(ok)}, p)
    pval, dval, gap, resid = _certify(p, x, z, y)
    feas = max(resid.values())
    if gap <= opts.gap_tol and feas <= opts.feas_tol:
        st = OPTIMAL
    elif status == "unknown" and iters >= opts.max_iter:
        st = ITER_LIMIT
    else:
        st = NUMERICAL
    return SolveResult(st, pval, dval, gap, x, z, y, iters, resid, p)


def _expand_y(p, y):
    total = p.locations.get(("__neq__",), 0)
    kept = p.locations.get(("__kept__",), np.arange(total))
    out = np.zeros(total)
    if len(y) == len(kept):
        out[kept] = y
    return out


# ---------------------------------------------------------------------------
# Model builder


class Model:
    """Builder for conic programs in terms of :class:`Affine` expressions."""

    def __init__(self):
        self._vars = []
        self._nparams = 0
        self._psd = []  # (handle, expr)
        self._lin = []  # (handle, scalar expr)  expr >= 0
        self._eq = []  # (handle, expr, rhs)
        self._objective = None
        self._sign = 1.0
        self._handles = 0

    def _new_var(self, kind, n, size, name):
        v = Variable(kind, n, size, self._nparams, name)
        self._nparams += size
        self._vars.append(v)
        return Affine(n, terms={v: v.basis()})

    def herm(self, n, real=False, psd=False, name=""):
        """A Hermitian ``n x n`` variable (real symmetric if ``real``)."""
        size = n * (n + 1) // 2 if real else n * n
        x = self._new_var("sym" if real else "herm", n, size, name)
        if psd:
            self.psd(x)
        return x

    def general(self, n, real=False, name=""):
        """An unstructured ``n x n`` matrix variable (complex unless ``real``)."""
        return self._new_var("rgen" if real else "gen", n, n * n if real else 2 * n * n, name)

    def scalar(self, nonneg=False, name=""):
        x = self._new_var("scalar", 1, 1, name)
        if nonneg:
            self.nonneg(x)
        return x

    def _handle(self):
        self._handles += 1
        return self._handles

    def psd(self, expr):
        h = self._handle()
        self._psd.append((h, expr))
        return h

    def nonneg(self, expr):
        if expr.n != 1:
            raise ShapeError("nonneg constraints take scalar expressions")
        h = self._handle()
        self._lin.append((h, expr))
        return h

    def eq(self, expr, rhs=0.0):
        h = self._handle()
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.ndim == 0:
            rhs = rhs * np.eye(expr.n) if expr.n == 1 else np.full((expr.n, expr.n), rhs)
        self._eq.append((h, expr, rhs))
        return h

    def minimize(self, expr):
        self._objective, self._sign = expr, 1.0

    def maximize(self, expr):
        self._objective, self._sign = expr, -1.0

    # compilation ----------------------------------------------------------
    def _dense(self, expr):
        """Return (const (n,n), coeffs (n,n,N)) over the full parameter vector."""
        coef = np.zeros((expr.n, expr.n, self._nparams), dtype=complex)
        for v, c in expr.terms.items():
            coef[:, :, v.offset : v.offset + v.size] += c
        return expr.const, coef

    def compile(self):
        N = self._nparams
        if N == 0:
            raise ShapeError("model has no variables")
        G_rows, h_rows, locations = [], [], {}
        for row, (hd, expr) in enumerate(self._lin):
            const, coef = self._dense(expr)
            G_rows.append(-coef[0, 0].real[None, :])
            h_rows.append(np.array([const[0, 0].real]))
            locations[hd] = ("l", row)
        n_lin = len(self._lin)
        dense_psd = []
        for hd, expr in self._psd:
            const, coef = self._dense(expr)
            red = _commuting_reduction(const, coef)
            if red is None:
                dense_psd.append((hd, expr, const, coef))
                continue
            u, rows_h, rows_g, groups = red
            G_rows.append(-rows_g)
            h_rows.append(rows_h)
            locations[hd] = ("ld", n_lin, len(rows_h), u, groups)
            n_lin += len(rows_h)
        sizes = []
        for blk, (hd, expr, const, coef) in enumerate(dense_psd):
            n = expr.n
            cplx = not expr.is_real()
            if cplx:
                const = np.block([[const.real, -const.imag], [const.imag, const.real]])
                coef = np.concatenate(
                    [
                        np.concatenate([coef.real, -coef.imag], axis=1),
                        np.concatenate([coef.imag, coef.real], axis=1),
                    ],
                    axis=0,
                )
                m = 2 * n
            else:
                const, coef, m = const.real, coef.real, n
            const = (const + const.T) / 2
            coef = (coef + coef.transpose(1, 0, 2)) / 2
            G_rows.append(-coef.reshape(m * m, N))
            h_rows.append(const.reshape(m * m))
            sizes.append(m)
            locations[hd] = ("s", blk, cplx, n)
        A_rows, b_rows, nrow = [], [], 0
        for hd, expr, rhs in self._eq:
            const, coef = self._dense(expr)
            n = expr.n
            cplx = not (expr.is_real() and not np.any(rhs.imag))
            rows_a, rows_b = [], []
            for i in range(n):
                rows_a.append(coef[i, i].real)
                rows_b.append((rhs[i, i] - const[i, i]).real)
            for i in range(n):
                for j in range(i + 1, n):
                    rows_a.append(coef[i, j].real)
                    rows_b.append((rhs[i, j] - const[i, j]).real)
                    if cplx:
                        rows_a.append(coef[i, j].imag)
                        rows_b.append((rhs[i, j] - const[i, j]).imag)
            locations[hd] = ("eq", list(range(nrow, nrow + len(rows_a))), n, cplx)
            nrow += len(rows_a)
            A_rows.extend(rows_a)
            b_rows.extend(rows_b)
        G = np.vstack(G_rows) if G_rows else np.zeros((0, N))
        h = np.concatenate(h_rows) if h_rows else np.zeros(0)
        A = np.array(A_rows).reshape(-1, N)
        b = np.array(b_rows)
        kept = np.arange(A.shape[0])
        dropped = ()
        if A.shape[0]:
            A, b, kept, dropped = _reduce_rows(A, b)
        locations[("__neq__",)] = nrow
        locations[("__kept__",)] = kept
        if self._objective is None:
            c, offset = np.zeros(N), 0.0
        else:
            const, coef = self._dense(self._objective)
            c, offset = self._sign * coef[0, 0].real, const[0, 0].real
        return ConicProblem(
            c=np.ascontiguousarray(c),
            G=np.ascontiguousarray(G),
            h=np.ascontiguousarray(h),
            A=np.ascontiguousarray(A),
            b=np.ascontiguousarray(b),
            n_lin=n_lin,
            psd_sizes=sizes,
            objective_sign=self._sign,
            objective_offset=offset,
            locations=locations,
            dropped_eq=dropped,
        )

    def solve(self, options=None):
        return solve(self.compile(), options)


REDUCE_MIN_DIM = 6
REDUCE_MAX_TERMS = 32


def _commuting_reduction(const, coef, tol=1e-9):
    """Replace a PSD block by linear rows when its data commute.

    If the constant and every coefficient matrix are diagonal in one
    orthonormal basis, the block is PSD iff each diagonal entry is
    nonnegative.  Returns ``(U, h, G, groups)`` with duplicate rows merged,
    or None when the data do not commute.
    """
    n, _, N = coef.shape
    if n < REDUCE_MIN_DIM:
        return None
    nz = np.flatnonzero(np.any(coef != 0, axis=(0, 1)))
    if len(nz) > REDUCE_MAX_TERMS:
        return None
    mats = [const] + [coef[:, :, k] for k in nz]
    mats = [(m + m.conj().T) / 2 for m in mats]
    weights = np.random.default_rng(12345).standard_normal(len(mats))
    combo = sum(w * m for w, m in zip(weights, mats))
    _, u = np.linalg.eigh(combo)
    diags = []
    for m in mats:
        t = u.conj().T @ m @ u
        d = np.diag(t)
        if np.linalg.norm(t - np.diag(d)) > tol * (1.0 + np.linalg.norm(m)):
            return None
        diags.append(d.real)
    table = np.column_stack(diags)  # row i: (const_i, coef_i over nz)
    scale = max(np.max(np.abs(table)), 1e-300)
    _, first, inverse = np.unique(np.round(table / scale, 11), axis=0, return_index=True,
                                  return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    groups = [np.flatnonzero(inverse == g) for g in range(len(first))]
    rows_h = table[first, 0]
    rows_g = np.zeros((len(first), N))
    rows_g[:, nz] = table[first, 1:]
    return u, rows_h, rows_g, groups


def _reduce_rows(A, b, rtol=1e-10):
    """Drop linearly dependent equality rows; reject inconsistent systems."""
    _, r, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * max(diag[0], 1.0))) if diag.size else 0
    kept = np.sort(piv[:rank])
    dropped = tuple(int(i) for i in np.sort(piv[rank:]))
    if dropped:
        sol, *_ = np.linalg.lstsq(A[kept].T, A[list(dropped)].T, rcond=None)
        if np.max(np.abs(sol.T @ b[kept] - b[list(dropped)])) > 1e-8 * (1 + np.max(np.abs(b))):
            raise NumericError("equality constraints are inconsistent")
    return A[kept], b[kept], kept, dropped


def require_optimal(result, what="conic solve"):
    """Raise :class:`NumericError` unless the result is certified optimal."""
    if not result.optimal:
        raise NumericError(
            f"{what} ended with status {result.status} (gap {result.gap:.2e}, "
            f"residuals {result.residuals})",
            iterations=result.iterations,
        )
    return result
