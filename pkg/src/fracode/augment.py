"""Chain-trick augmentation: memory integrals become auxiliary linear ODEs.

With the kernel compressed into sum_i c_i exp(-gamma_i t), each memory
integral I = J^alpha G turns into n auxiliary states

    z_i' = -gamma_i z_i + G(t, y),   z_i(0) = 0,   I ~= sum_i c_i z_i.

For alpha > 1 the kernel t**(alpha-1)/Gamma(alpha) is split into the exact
monomial t**(m-1) (m = ceil(alpha)) times a kernel of order
alpha0 = alpha - m + 1 in (0, 1); the monomial is absorbed by chaining m
states per exponential,

    z_{i,1}' = -gamma_i z_{i,1} + G,
    z_{i,k}' = -gamma_i z_{i,k} + (k-1) z_{i,k-1},   k = 2..m,

and I ~= prefactor * sum_i c_i z_{i,m} with
prefactor = 1/((alpha-1)...(alpha-m+1)).

The Jacobian of the augmented vector field is arrow shaped: a d x d head,
one diagonal (m = 1) or lower-bidiagonal (m >= 2) tail block per term, a
rank-one head-to-tail coupling dF/dI_j acting on the weighted chain tails,
and a tail-to-head coupling dG_j/dy feeding the chain heads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .problem import FractionalIVP
from .soe import build_soe, choose_parameters

__all__ = ["BlockSpec", "AugmentedSystem", "StructuredJacobian", "augment", "rhs", "jacobian"]


@dataclass(frozen=True)
class BlockSpec:
    """Auxiliary-state block for one memory term.

    m         : chain length per exponential, ceil(alpha)
    n         : number of exponentials
    weights   : (n,) kernel weights c_i
    exponents : (n,) decay rates gamma_i
    prefactor : monomial-split constant, 1 when m = 1
    """

    m: int
    n: int
    weights: np.ndarray
    exponents: np.ndarray
    prefactor: float

    @property
    def size(self) -> int:
        return self.m * self.n


class AugmentedSystem:
    """The stiff ODE/DAE produced by augmenting a FractionalIVP.

    State layout: the d head variables first, then one block of m_j * n_j
    auxiliary states per memory term, in term order; inside a block the
    chain states are grouped per exponential.  All auxiliary initial
    values are zero.
    """

    def __init__(self, base: FractionalIVP, blocks: Sequence[BlockSpec], eps: float):
        self.base = base
        self.blocks = tuple(blocks)
        self.eps = eps
        d = base.dim
        sizes = np.array([b.size for b in self.blocks], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.aux_dim = int(self.offsets[-1])
        self.total_dim = d + self.aux_dim
        self.mass = np.concatenate([base.mass_diag, np.ones(self.aux_dim)])
        self.y0 = np.concatenate([base.y0, np.zeros(self.aux_dim)])

        gamma_rep = np.empty(self.aux_dim)
        sub = np.zeros(self.aux_dim)
        wtilde = np.zeros(self.aux_dim)
        k1_pos = []
        term_of_k1 = []
        for j, b in enumerate(self.blocks):
            o = self.offsets[j]
            idx = o + np.arange(b.n, dtype=np.int64) * b.m
            gamma_rep[o : o + b.size] = np.repeat(b.exponents, b.m)
            for k in range(1, b.m):
                sub[idx + k] = float(k)
            wtilde[idx + b.m - 1] = b.prefactor * b.weights
            k1_pos.append(idx)
            term_of_k1.append(np.full(b.n, j, dtype=np.int64))
        self.gamma_rep = gamma_rep
        self.sub = sub
        self.wtilde = wtilde
        self.k1_pos = (
            np.concatenate(k1_pos) if k1_pos else np.empty(0, dtype=np.int64)
        )
        self.term_of_k1 = (
            np.concatenate(term_of_k1) if term_of_k1 else np.empty(0, dtype=np.int64)
        )
        max_m = max((b.m for b in self.blocks), default=1)
        self.lev_idx = tuple(
            np.flatnonzero(sub == float(lev)).astype(np.int64)
            for lev in range(1, max_m)
        )
        # one entry per family of blocks sharing kernel data and shape;
        # their Schur scalars coincide, so they are computed once
        fams: dict = {}
        for j, b in enumerate(self.blocks):
            key = (id(b.weights), b.m, b.prefactor)
            fams.setdefault(key, (b, []))[1].append(j)
        self.chat_families = tuple(
            (b, np.asarray(idx, dtype=np.int64)) for b, idx in fams.values()
        )

    @property
    def dim_head(self) -> int:
        return self.base.dim

    def integrals(self, z: np.ndarray, out: Optional[np.ndarray] = None) -> np.ndarray:
        """I_j values from auxiliary states; batched over leading axes."""
        if out is None:
            out = np.empty(z.shape[:-1] + (len(self.blocks),))
        return _backend.block_integrals(z, self.wtilde, self.offsets, out)


def augment(p: FractionalIVP, eps: float, t_end: Optional[float] = None) -> AugmentedSystem:
    """Build the augmented system, one kernel approximation per distinct order.

    eps is the relative kernel accuracy; t_end defaults to the problem's
    final time and sets the kernel validity window.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if t_end is None:
        t_end = p.t_span[1]
    soe_cache: dict = {}
    blocks = []
    for term in p.integrals:
        alpha = term.alpha
        if alpha >= 1.0 and alpha == int(alpha):
            raise ValueError(
                f"integer order {alpha} has a polynomial kernel; "
                "rewrite it as iterated ODE states instead of a memory term"
            )
        m = int(np.ceil(alpha))
        alpha0 = alpha - m + 1
        prefactor = 1.0
        for k in range(1, m):
            prefactor /= alpha - k
        if alpha0 not in soe_cache:
            soe_cache[alpha0] = build_soe(choose_parameters(alpha0, eps, t_end))
        soe = soe_cache[alpha0]
        blocks.append(
            BlockSpec(
                m=m,
                n=soe.n_terms,
                weights=soe.weights,
                exponents=soe.exponents,
                prefactor=prefactor,
            )
        )
    return AugmentedSystem(p, blocks, eps)


def rhs(sys: AugmentedSystem, t: float, state: np.ndarray) -> np.ndarray:
    """Vector field of the augmented system at one point."""
    d = sys.dim_head
    y = state[:d]
    z = state[d:]
    i_vals = sys.integrals(z)
    out = np.empty(sys.total_dim)
    out[:d] = sys.base.f(t, y, i_vals)
    g = sys.base.eval_g(t, y)
    _backend.block_rhs(z, sys.gamma_rep, sys.sub, sys.k1_pos, sys.term_of_k1, g, out[d:])
    return out


def rhs_stages(
    sys: AugmentedSystem, ts: np.ndarray, states: np.ndarray, out: np.ndarray
) -> np.ndarray:
    """Vector field at several stage points at once.

    states and out have shape (n_stages, total_dim); the auxiliary part is
    evaluated in one batched sweep, head callbacks run per stage.
    """
    d = sys.dim_head
    z = states[:, d:]
    i_vals = sys.integrals(z)
    g = np.empty((len(ts), len(sys.blocks)))
    for q, t in enumerate(ts):
        out[q, :d] = sys.base.f(t, states[q, :d], i_vals[q])
        g[q] = sys.base.eval_g(t, states[q, :d])
    _backend.block_rhs(z, sys.gamma_rep, sys.sub, sys.k1_pos, sys.term_of_k1, g, out[:, d:])
    return out


@dataclass
class StructuredJacobian:
    """Arrow-shaped Jacobian descriptor of the augmented vector field.

    head      : (d, d) dense, or (b_l + b_u + 1, d) banded storage with
                entry [b_u + r - c, c] = dF_r/dy_c
    cols      : dF/dI as (d, n_terms) dense, or (n_terms,) values living at
                rows term_rows in banded mode
    rows      : dG/dy as (n_terms, d) dense, or (n_terms, b_l + b_u + 1)
                window segments centered on term_rows in banded mode
    bandwidths: (b_l, b_u) or None for dense storage
    term_rows : (n_terms,) row of each coupling column (banded mode)
    sys       : the augmented system carrying the static block structure
    """

    head: np.ndarray
    cols: np.ndarray
    rows: np.ndarray
    bandwidths: Optional[tuple]
    term_rows: Optional[np.ndarray]
    sys: AugmentedSystem


def jacobian(sys: AugmentedSystem, t: float, state: np.ndarray) -> StructuredJacobian:
    """Evaluate the structured Jacobian at one point."""
    d = sys.dim_head
    y = state[:d]
    z = state[d:]
    i_vals = sys.integrals(z)
    p = sys.base
    head = np.asarray(p.df_dy(t, y, i_vals), dtype=float)
    cols = np.asarray(p.df_di(t, y, i_vals), dtype=float)
    rows = p.eval_dg(t, y) if sys.blocks else np.zeros((0, d))
    term_rows = None
    if p.bandwidths is not None:
        term_rows = np.asarray(p.term_rows, dtype=np.int64)
    return StructuredJacobian(
        head=head,
        cols=cols,
        rows=rows,
        bandwidths=p.bandwidths,
        term_rows=term_rows,
        sys=sys,
    )
