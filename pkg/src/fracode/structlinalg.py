"""Structured solvers for the shifted systems (s*M - J) u = a.

J is the arrow-shaped Jacobian produced by the augmentation: a d x d head,
diagonal or lower-bidiagonal tail blocks with diagonal entries -gamma_i,
rank-one head-to-tail couplings dF/dI_j acting on the weighted chain
tails, and tail-to-head couplings dG_j/dy feeding the chain heads.  The
tail rows are eliminated exactly: with

    chat_j(s) = w_j^T (s I - J_j)^{-1} e_j

(w_j the coupling weights on the k = m_j states, e_j the k = 1 indicator),
the head unknowns satisfy the small system

    (s M_h - Jhat) u_0 = a_0 + sum_j (dF/dI_j) q_j,
    Jhat = dF/dy + sum_j chat_j (dF/dI_j)(dG_j/dy),

and the tail unknowns follow by one forward substitution per block.  The
whole solve costs O(d^3 + D) with a dense head, O(d (b_l + b_u)^2 + D)
with a banded head, D the total tail size.  chat_j is a scalar because
each G_j is scalar valued.

Three modes are provided: dense-head and banded-head implement the
elimination; full-dense materializes the entire matrix and LU-factors it,
serving as the reference oracle and as the cost baseline.

All tail diagonals satisfy Re(s) + gamma_i > 0 for the shifts the
integrator produces (Re(s) > 0, gamma_i > 0), so the forward
substitutions never meet a small pivot and no pivoting across the
head/tail boundary is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import lapack

from . import _backend
from .augment import StructuredJacobian

__all__ = [
    "Factorization",
    "DenseHeadSolver",
    "BandedHeadSolver",
    "FullDenseSolver",
    "make_solver",
    "factorize",
    "solve",
    "materialize_dense",
]

MODES = ("dense-head", "banded-head", "full-dense")
_ALIASES = {"structured": "dense-head", "banded": "banded-head", "dense": "full-dense"}

DENSE_CAP = 5000


def _canonical_mode(mode: str) -> str:
    mode = _ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES + tuple(_ALIASES)}")
    return mode


@dataclass(frozen=True)
class Factorization:
    """One factored shift s*M - J, ready for repeated solves.

    head_factors     : LU data of the reduced head system (layout depends
                       on mode and head size)
    block_solve_data : reciprocals 1/(s + gamma_i) driving the tail
                       forward substitutions; None in full-dense mode
    chat             : per-term elimination scalars chat_j(s)
    """

    mode: str
    s: complex
    head_factors: tuple
    block_solve_data: Optional[tuple]
    chat: Optional[np.ndarray]
    _solver: object

    @property
    def dtype(self):
        return np.complex128 if isinstance(self.s, complex) else np.float64

    def solve(self, a: np.ndarray) -> np.ndarray:
        return self._solver._solve(self, a)


def _expand_banded(J: StructuredJacobian):
    """Dense head, coupling columns and coupling rows from banded storage."""
    d = J.sys.dim_head
    b_l, b_u = J.bandwidths
    width = b_l + b_u + 1
    head = np.zeros((d, d))
    band = np.asarray(J.head, dtype=float)
    for r_off in range(-b_u, b_l + 1):
        diag_vals = band[b_u + r_off]
        if r_off >= 0:
            np.fill_diagonal(head[r_off:, :], diag_vals[: d - r_off])
        else:
            np.fill_diagonal(head[:, -r_off:], diag_vals[-r_off:])
    nt = len(J.term_rows)
    cols = np.zeros((d, nt))
    cols[J.term_rows, np.arange(nt)] = np.asarray(J.cols, dtype=float)
    rows = np.zeros((nt, d))
    win = np.asarray(J.rows, dtype=float)
    for w in range(width):
        c = J.term_rows - b_l + w
        ok = (c >= 0) & (c < d)
        rows[np.flatnonzero(ok), c[ok]] = win[ok, w]
    return head, cols, rows


def _dense_parts(J: StructuredJacobian):
    if J.bandwidths is not None:
        return _expand_banded(J)
    d = J.sys.dim_head
    head = np.asarray(J.head, dtype=float)
    cols = np.asarray(J.cols, dtype=float).reshape(d, -1)
    rows = np.asarray(J.rows, dtype=float).reshape(-1, d)
    return head, cols, rows


def _chat(sys, s, dtype) -> np.ndarray:
    """Elimination scalars: one bidiagonal forward solve per exponential.

    For a chain of length m over decay rate gamma, (s I - J_j) w = e_1 has
    w_1 = u, w_k = (k-1) u w_{k-1} with u = 1/(s + gamma); the scalar is
    the weighted tail component prefactor * sum_i c_i w_{i,m}.  Blocks
    sharing kernel data and shape get identical values, computed once.
    """
    chat = np.empty(len(sys.blocks), dtype=dtype)
    for b, idx in sys.chat_families:
        u = 1.0 / (s + b.exponents)
        w = u
        for k in range(2, b.m + 1):
            w = w * ((k - 1) * u)
        chat[idx] = b.prefactor * (b.weights @ w)
    return chat


def _check_tail_mass(sys, mass):
    mass = np.asarray(mass, dtype=float)
    if mass.shape != (sys.total_dim,):
        raise ValueError(f"mass diagonal must have length {sys.total_dim}")
    d = sys.dim_head
    if mass.size > d and not np.all(mass[d:] == 1.0):
        raise ValueError("auxiliary rows must carry unit mass")
    return mass


def _lu_head(A, s):
    """LU of a small dense head; explicit inverses below 3x3."""
    d = A.shape[0]
    if d == 1:
        piv = A[0, 0]
        if piv == 0.0:
            raise LinAlgError("singular head matrix: zero pivot at index 1")
        return ("inv1", 1.0 / piv)
    if d == 2:
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if det == 0.0:
            raise LinAlgError("singular head matrix: zero pivot at index 2")
        return ("inv2", A[0, 0], A[0, 1], A[1, 0], A[1, 1], 1.0 / det)
    getrf = lapack.zgetrf if np.iscomplexobj(A) else lapack.dgetrf
    lu, ipiv, info = getrf(np.asfortranarray(A), overwrite_a=1)
    if info > 0:
        raise LinAlgError(f"singular head matrix: zero pivot at index {info}")
    return ("lu", lu, ipiv)


def _solve_head(factors, b):
    kind = factors[0]
    if kind == "inv1":
        return b * factors[1]
    if kind == "inv2":
        _, a11, a12, a21, a22, inv_det = factors
        out = np.empty(2, dtype=np.result_type(inv_det, b.dtype))
        out[0] = (a22 * b[0] - a12 * b[1]) * inv_det
        out[1] = (a11 * b[1] - a21 * b[0]) * inv_det
        return out
    _, lu, ipiv = factors
    getrs = lapack.zgetrs if np.iscomplexobj(lu) else lapack.dgetrs
    x, info = getrs(lu, ipiv, b)
    return x


class DenseHeadSolver:
    """Schur elimination with a dense d x d reduced head system."""

    mode = "dense-head"

    def __init__(self):
        self.sys = None

    def prepare(self, J: StructuredJacobian, mass):
        sys = J.sys
        self.sys = sys
        self.mass_head = _check_tail_mass(sys, mass)[: sys.dim_head]
        self.head, self.cols, self.rows = _dense_parts(J)
        # complex copies keep the shifted assembly and the coupling products
        # on the fast homogeneous matmul path
        self.cols_cplx = self.cols.astype(np.complex128)
        self.rows_cplx = self.rows.astype(np.complex128)
        self._idx = np.arange(sys.dim_head)
        self._scratch = {}
        # scalar equations with one memory term take a pure-scalar head path
        self._scalar_head = sys.dim_head == 1 and len(sys.blocks) == 1
        if self._scalar_head:
            self._c00 = float(self.cols[0, 0])
            self._r00 = float(self.rows[0, 0])
        return self

    def factorize(self, s) -> Factorization:
        sys = self.sys
        dtype = np.complex128 if isinstance(s, complex) else np.float64
        inv_sg = 1.0 / (s + sys.gamma_rep) if sys.aux_dim else np.empty(0, dtype)
        chat = _chat(sys, s, dtype)
        cols = self.cols_cplx if dtype is np.complex128 else self.cols
        rows = self.rows_cplx if dtype is np.complex128 else self.rows
        A = -(self.head + (cols * chat) @ rows)
        if A.dtype != dtype:
            A = A.astype(dtype)
        idx = self._idx
        A[idx, idx] += s * self.mass_head
        return Factorization(
            mode=self.mode,
            s=s,
            head_factors=_lu_head(A, s),
            block_solve_data=(inv_sg,),
            chat=chat,
            _solver=self,
        )

    def _solve(self, f: Factorization, a: np.ndarray) -> np.ndarray:
        sys = self.sys
        d = sys.dim_head
        dtype = f.dtype
        a = np.asarray(a)
        if a.dtype != dtype:
            a = a.astype(dtype)
        if a.shape != (sys.total_dim,):
            raise ValueError(f"right-hand side must have length {sys.total_dim}")
        a0, az = a[:d], a[d:]
        (inv_sg,) = f.block_solve_data
        # scratch reused across solves (solves run sequentially); outputs
        # are always fresh arrays
        sc = self._scratch.get(dtype)
        if sc is None:
            nt = len(sys.blocks)
            sc = self._scratch[dtype] = (
                np.empty(sys.aux_dim, dtype=dtype),
                np.empty(nt, dtype=dtype),
                np.empty(d, dtype=dtype),
                np.empty(nt, dtype=dtype),
            )
        vbuf, qbuf, bbuf, gbuf = sc
        q = _backend.schur_reduce(
            az, inv_sg, sys.sub, sys.wtilde, sys.offsets, sys.lev_idx, vbuf, qbuf
        )
        out = np.empty(sys.total_dim, dtype=dtype)
        if self._scalar_head and f.head_factors[0] == "inv1":
            u00 = (a0[0] + self._c00 * q[0]) * f.head_factors[1]
            out[0] = u00
            gbuf[0] = self._r00 * u00
            _backend.schur_expand(
                az, inv_sg, sys.sub, sys.k1_pos, sys.term_of_k1, gbuf,
                sys.lev_idx, vbuf, out[1:],
            )
            return out
        cplx = dtype is np.complex128
        cols = self.cols_cplx if cplx else self.cols
        rows = self.rows_cplx if cplx else self.rows
        np.dot(cols, q, out=bbuf)
        np.add(bbuf, a0, out=bbuf)
        u0 = _solve_head(f.head_factors, bbuf)
        out[:d] = u0
        if sys.aux_dim:
            g = np.dot(rows, u0, out=gbuf)
            _backend.schur_expand(
                az, inv_sg, sys.sub, sys.k1_pos, sys.term_of_k1, g,
                sys.lev_idx, vbuf, out[d:],
            )
        return out


class BandedHeadSolver:
    """Schur elimination with a banded reduced head system.

    Requires the banded problem conventions: banded head storage, one
    coupling column entry per term at row term_rows[j], and coupling rows
    confined to the band window around that row.  The reduced system then
    keeps the declared bandwidths exactly, and is factored with banded LU
    (partial pivoting, widened upper band).
    """

    mode = "banded-head"

    def __init__(self):
        self.sys = None

    def prepare(self, J: StructuredJacobian, mass):
        if J.bandwidths is None:
            raise ValueError("banded-head mode needs banded head storage")
        sys = J.sys
        self.sys = sys
        mass = _check_tail_mass(sys, mass)
        d = sys.dim_head
        b_l, b_u = J.bandwidths
        self.b_l, self.b_u = b_l, b_u
        width = b_l + b_u + 1
        # gbtrf storage: entry (r, c) at row b_l + b_u + r - c; top b_l
        # rows are pivoting workspace
        ab = np.zeros((2 * b_l + b_u + 1, d))
        ab[b_l:, :] = -np.asarray(J.head, dtype=float)
        self.ab_base = ab
        self.mass_head = mass[:d]
        self.term_rows = np.asarray(J.term_rows, dtype=np.int64)
        self.colvals = np.asarray(J.cols, dtype=float).reshape(-1)
        nt = len(self.term_rows)
        self.rows_unique = len(np.unique(self.term_rows)) == nt
        cidx = self.term_rows[:, None] - b_l + np.arange(width)[None, :]
        valid = (cidx >= 0) & (cidx < d)
        self.win = np.asarray(J.rows, dtype=float).reshape(nt, width) * valid
        self.win_cols = np.clip(cidx, 0, d - 1)
        self.valid = valid
        # precomputed coupling products: Jhat gets -chat_j * colvals_j * win_jw
        self.colwin = self.colvals[:, None] * self.win

    def factorize(self, s) -> Factorization:
        sys = self.sys
        d = sys.dim_head
        b_l, b_u = self.b_l, self.b_u
        dtype = np.complex128 if isinstance(s, complex) else np.float64
        inv_sg = 1.0 / (s + sys.gamma_rep) if sys.aux_dim else np.empty(0, dtype)
        chat = _chat(sys, s, dtype)
        ab = self.ab_base.astype(dtype, order="F")
        ab[b_l + b_u, :] += s * self.mass_head
        width = b_l + b_u + 1
        for w in range(width):
            # window entry w of every term lands on one storage row
            vals = chat * self.colwin[:, w]
            ok = self.valid[:, w]
            r = 2 * b_l + b_u - w
            if self.rows_unique:
                ab[r, self.win_cols[ok, w]] -= vals[ok]
            else:
                np.subtract.at(ab, (r, self.win_cols[ok, w]), vals[ok])
        gbtrf = lapack.zgbtrf if dtype == np.complex128 else lapack.dgbtrf
        lu, ipiv, info = gbtrf(ab, b_l, b_u, overwrite_ab=1)
        if info > 0:
            raise LinAlgError(f"singular head matrix: zero pivot at index {info}")
        return Factorization(
            mode=self.mode,
            s=s,
            head_factors=("gb", lu, ipiv),
            block_solve_data=(inv_sg,),
            chat=chat,
            _solver=self,
        )

    def _solve(self, f: Factorization, a: np.ndarray) -> np.ndarray:
        sys = self.sys
        d = sys.dim_head
        dtype = f.dtype
        a = np.asarray(a, dtype=dtype)
        if a.shape != (sys.total_dim,):
            raise ValueError(f"right-hand side must have length {sys.total_dim}")
        a0, az = a[:d], a[d:]
        (inv_sg,) = f.block_solve_data
        vbuf = np.empty_like(az)
        q = _backend.schur_reduce(
            az, inv_sg, sys.sub, sys.wtilde, sys.offsets, sys.lev_idx,
            vbuf, np.empty(len(sys.blocks), dtype=dtype),
        )
        ahat = a0.copy()
        contrib = self.colvals * q
        if self.rows_unique:
            ahat[self.term_rows] += contrib
        else:
            np.add.at(ahat, self.term_rows, contrib)
        _, lu, ipiv = f.head_factors
        gbtrs = lapack.zgbtrs if dtype == np.complex128 else lapack.dgbtrs
        u0, info = gbtrs(lu, self.b_l, self.b_u, ahat, ipiv)
        out = np.empty(sys.total_dim, dtype=dtype)
        out[:d] = u0
        if sys.aux_dim:
            g = np.einsum("tw,tw->t", self.win, u0[self.win_cols])
            _backend.schur_expand(
                az, inv_sg, sys.sub, sys.k1_pos, sys.term_of_k1, g,
                sys.lev_idx, vbuf, out[d:],
            )
        return out


def _materialize_base(J: StructuredJacobian) -> np.ndarray:
    """-J as an explicit dense matrix (the s-independent part of s*M - J)."""
    sys = J.sys
    d = sys.dim_head
    total = sys.total_dim
    head, cols, rows = _dense_parts(J)
    base = np.zeros((total, total), order="F")
    base[:d, :d] = -head
    for j, b in enumerate(sys.blocks):
        o = d + int(sys.offsets[j])
        sl = slice(o, o + b.size)
        base[:d, sl] = -np.outer(cols[:, j], sys.wtilde[sl.start - d : sl.stop - d])
    if sys.aux_dim:
        base[d + sys.k1_pos, :d] = -rows[sys.term_of_k1]
        idx = d + np.arange(sys.aux_dim)
        base[idx, idx] = sys.gamma_rep
        pos = np.flatnonzero(sys.sub)
        base[d + pos, d + pos - 1] = -sys.sub[pos]
    return base


class FullDenseSolver:
    """Reference solver: materialize s*M - J and LU-factor all of it.

    O(D^3) per factorization; the structured modes exist to avoid exactly
    this cost.  Kept as the correctness oracle and timing baseline.
    """

    mode = "full-dense"

    def __init__(self, cap: int = DENSE_CAP):
        self.cap = cap
        self.sys = None

    def prepare(self, J: StructuredJacobian, mass):
        sys = J.sys
        if sys.total_dim > self.cap:
            raise ValueError(
                f"full-dense mode capped at dimension {self.cap}, got {sys.total_dim}"
            )
        self.sys = sys
        self.mass = _check_tail_mass(sys, mass)
        self.base = _materialize_base(J)
        self.diag_idx = np.arange(sys.total_dim)
        return self

    def factorize(self, s) -> Factorization:
        dtype = np.complex128 if isinstance(s, complex) else np.float64
        A = self.base.astype(dtype, order="F")
        A[self.diag_idx, self.diag_idx] += s * self.mass
        getrf = lapack.zgetrf if dtype == np.complex128 else lapack.dgetrf
        lu, ipiv, info = getrf(A, overwrite_a=1)
        if info > 0:
            raise LinAlgError(f"singular matrix: zero pivot at index {info}")
        return Factorization(
            mode=self.mode,
            s=s,
            head_factors=("lu", lu, ipiv),
            block_solve_data=None,
            chat=None,
            _solver=self,
        )

    def _solve(self, f: Factorization, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=f.dtype)
        if a.shape != (self.sys.total_dim,):
            raise ValueError(f"right-hand side must have length {self.sys.total_dim}")
        _, lu, ipiv = f.head_factors
        getrs = lapack.zgetrs if f.dtype == np.complex128 else lapack.dgetrs
        x, info = getrs(lu, ipiv, a)
        return x


def make_solver(mode: str):
    """Solver instance for a mode name (aliases: structured, banded, dense)."""
    mode = _canonical_mode(mode)
    if mode == "dense-head":
        return DenseHeadSolver()
    if mode == "banded-head":
        return BandedHeadSolver()
    return FullDenseSolver()


def factorize(J: StructuredJacobian, mass, s, mode: str = "dense-head") -> Factorization:
    """One-shot prepare + factorize; see the solver classes for reuse."""
    solver = make_solver(mode)
    solver.prepare(J, mass)
    return solver.factorize(s)


def solve(f: Factorization, a: np.ndarray) -> np.ndarray:
    """Solve (s*M - J) u = a using a previously computed factorization."""
    return f.solve(a)


def materialize_dense(J: StructuredJacobian, mass, s, cap: int = DENSE_CAP) -> np.ndarray:
    """Explicit s*M - J, for oracles and debugging; capped at `cap` rows."""
    sys = J.sys
    if sys.total_dim > cap:
        raise ValueError(
            f"dense materialization capped at dimension {cap}, got {sys.total_dim}"
        )
    mass = _check_tail_mass(sys, mass)
    dtype = np.complex128 if isinstance(s, complex) else np.float64
    A = _materialize_base(J).astype(dtype)
    idx = np.arange(sys.total_dim)
    A[idx, idx] += s * mass
    return A
