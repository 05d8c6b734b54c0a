"""Problem containers for integro-differential initial value problems.

The general shape handled by the solver is

    M y'(t) = F(t, y(t), I(t)),
    I_j(t)  = 1/Gamma(alpha_j) * integral_0^t (t-s)**(alpha_j - 1) G_j(s, y(s)) ds,

with a diagonal, possibly singular mass matrix M (zero rows make the
corresponding equations algebraic).  Each integrand G_j is scalar-valued;
vector integrands are expressed as several terms.  This keeps the
head-to-tail coupling of the augmented Jacobian exactly rank one per term.

Builders translate a Caputo-derivative equation D^alpha y = f(t, y) into
this shape.  For 0 < alpha < 1 the equation is equivalent to the algebraic
fixed-point form y = y(0) + I (one memory integral per component, mass
zero).  For non-integer alpha > 1 either the same integral form with the
initial Taylor polynomial (handled downstream by the kernel split), or the
differentiated form where y^(m-1) carries the memory term, is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegralTerm",
    "FractionalIVP",
    "from_caputo_volt1",
    "from_caputo_volt2",
    "from_caputo_integral",
    "attach_integral_output",
    "check_initial_consistency",
]


@dataclass(frozen=True)
class IntegralTerm:
    """One scalar memory integral I = J^alpha G.

    alpha : order of the fractional integral, > 0 and non-integer if >= 1.
    g     : (t, y) -> float, the integrand.
    dg_dy : (t, y) -> length-d array, gradient of g with respect to y.
            For banded problems this is the window segment described by
            FractionalIVP.bandwidths instead (length b_l + b_u + 1,
            centered on the term's row).
    """

    alpha: float
    g: Callable
    dg_dy: Callable

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"integral order must be positive, got {self.alpha}")


@dataclass(frozen=True)
class FractionalIVP:
    """An initial value problem M y' = F(t, y, I).

    dim       : number of head variables d.
    mass_diag : length-d diagonal of M; zero entries mark algebraic rows.
    f         : (t, y, i) -> length-d array, the right-hand side F.
    df_dy     : (t, y, i) -> (d, d) array, or banded storage of shape
                (b_l + b_u + 1, d) with entry [b_u + r - c, c] = dF_r/dy_c
                when bandwidths is set.
    df_di     : (t, y, i) -> (d, d_I) array whose column j is dF/dI_j; for
                banded problems a length-d_I vector of the values at the
                rows given by term_rows (one nonzero per column).
    integrals : the memory terms; i passed to the callbacks has length d_I.
    y0        : initial state.
    t_span    : (t0, t_end) with t0 = 0.
    bandwidths: optional (b_l, b_u) enabling banded storage conventions.
    term_rows : row index of each term's coupling column (banded mode).
    g_all     : optional vectorized (t, y) -> length-d_I array evaluating
                every integrand at once; falls back to per-term g.
    dg_all    : optional vectorized (t, y) -> (d_I, d) array, or
                (d_I, b_l + b_u + 1) window segments in banded mode.
    name      : optional label used in reports.
    exact     : optional (t) -> length-d array reference solution.
    """

    dim: int
    mass_diag: np.ndarray
    f: Callable
    df_dy: Callable
    df_di: Callable
    integrals: Sequence[IntegralTerm]
    y0: np.ndarray
    t_span: tuple
    bandwidths: Optional[tuple] = None
    term_rows: Optional[np.ndarray] = None
    g_all: Optional[Callable] = None
    dg_all: Optional[Callable] = None
    name: str = ""
    exact: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mass_diag", np.asarray(self.mass_diag, dtype=float))
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))
        if self.mass_diag.shape != (self.dim,):
            raise ValueError("mass_diag must have length dim")
        if self.y0.shape != (self.dim,):
            raise ValueError("y0 must have length dim")
        if self.bandwidths is not None and self.term_rows is None:
            raise ValueError("banded problems must declare term_rows")

    @property
    def n_integrals(self) -> int:
        return len(self.integrals)

    def eval_g(self, t: float, y: np.ndarray) -> np.ndarray:
        """All integrand values at (t, y), vectorized when possible."""
        if self.g_all is not None:
            return np.asarray(self.g_all(t, y), dtype=float)
        return np.array([term.g(t, y) for term in self.integrals], dtype=float)

    def eval_dg(self, t: float, y: np.ndarray) -> np.ndarray:
        """Stacked integrand gradients, (d_I, d) or banded (d_I, width)."""
        if self.dg_all is not None:
            return np.asarray(self.dg_all(t, y), dtype=float)
        return np.array([term.dg_dy(t, y) for term in self.integrals], dtype=float)


def _taylor_front(y0: np.ndarray, derivs0: Sequence[np.ndarray], t):
    """T(t) = y0 + t y'(0) + t^2/2 y''(0) + ..."""
    acc = np.array(y0, dtype=float, copy=True)
    fac = 1.0
    for k, dk in enumerate(derivs0, start=1):
        fac *= k
        acc = acc + (t**k / fac) * np.asarray(dk, dtype=float)
    return acc


def from_caputo_integral(
    alpha: float,
    f: Callable,
    df_dy: Callable,
    y0,
    derivs0: Sequence = (),
    t_end: float = 1.0,
    name: str = "",
    exact: Optional[Callable] = None,
) -> FractionalIVP:
    """Fixed-point integral form of D^alpha y = f(t, y), any non-integer alpha.

    Builds the all-algebraic system

        0 = T(t) + I(t) - y(t),

    where T is the Taylor polynomial of the initial data (degree
    ceil(alpha) - 1) and I_j = J^alpha f_j(., y(.)).  derivs0 supplies
    y'(0), y''(0), ... when alpha > 1.
    """
    if alpha <= 0.0 or alpha == math.floor(alpha) and alpha >= 1.0:
        raise ValueError(f"alpha must be positive and non-integer above 1, got {alpha}")
    m = math.ceil(alpha)
    if len(derivs0) != m - 1:
        raise ValueError(f"alpha={alpha} needs {m - 1} initial derivative vectors")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    d = len(y0)
    derivs0 = [np.atleast_1d(np.asarray(v, dtype=float)) for v in derivs0]

    if derivs0:
        def head(t, y, i):
            return _taylor_front(y0, derivs0, t) + i - y
    else:
        # degree-0 front: the Taylor polynomial is the constant y0
        def head(t, y, i):
            return y0 + i - y

    def head_dy(t, y, i):
        return -np.eye(d)

    def head_di(t, y, i):
        return np.eye(d)

    terms = tuple(
        IntegralTerm(
            alpha=alpha,
            g=(lambda t, y, j=j: float(np.atleast_1d(f(t, y))[j])),
            dg_dy=(lambda t, y, j=j: np.atleast_2d(df_dy(t, y))[j]),
        )
        for j in range(d)
    )
    return FractionalIVP(
        dim=d,
        mass_diag=np.zeros(d),
        f=head,
        df_dy=head_dy,
        df_di=head_di,
        integrals=terms,
        y0=y0,
        t_span=(0.0, t_end),
        g_all=lambda t, y: np.atleast_1d(f(t, y)),
        dg_all=lambda t, y: np.atleast_2d(df_dy(t, y)),
        name=name,
        exact=exact,
        params={"alpha": alpha},
    )


def from_caputo_volt1(
    alpha: float,
    f: Callable,
    df_dy: Callable,
    y0,
    t_end: float = 1.0,
    name: str = "",
    exact: Optional[Callable] = None,
) -> FractionalIVP:
    """Fixed-point form y = y0 + J^alpha f for 0 < alpha < 1.

    Every equation is algebraic (mass zero); the memory integrals carry the
    entire dynamics.  For alpha >= 1 use from_caputo_volt2 or the general
    from_caputo_integral.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(
            f"alpha must lie in (0, 1), got {alpha}; "
            "use from_caputo_volt2 or from_caputo_integral above 1"
        )
    return from_caputo_integral(
        alpha, f, df_dy, y0, (), t_end=t_end, name=name, exact=exact
    )


def from_caputo_volt2(
    alpha: float,
    f: Callable,
    df_dy: Callable,
    y0,
    derivs0: Sequence,
    t_end: float = 1.0,
    name: str = "",
    exact: Optional[Callable] = None,
) -> FractionalIVP:
    """Differentiated form of D^alpha y = f(t, y) for non-integer alpha > 1.

    With m = ceil(alpha), the highest classical derivative carries the
    memory term of order alpha - m + 1 in (0, 1):

        y'        = u_1,   ...,   u_{m-2}' = y^(m-1)(0) + I(t),
        I_j       = J^(alpha - m + 1) f_j(., y(.)),

    a plain ODE system (mass one everywhere) of dimension d*(m-1); the
    state is (y, u_1, ..., u_{m-2}).
    """
    if alpha <= 1.0 or alpha == math.floor(alpha):
        raise ValueError(f"alpha must be non-integer and above 1, got {alpha}")
    m = math.ceil(alpha)
    if derivs0 is None or len(derivs0) != m - 1:
        raise ValueError(f"alpha={alpha} needs {m - 1} initial derivative vectors")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    d = len(y0)
    derivs0 = [np.atleast_1d(np.asarray(v, dtype=float)) for v in derivs0]
    top0 = derivs0[-1]  # y^(m-1)(0), the constant part of the last row
    dim = d * (m - 1)
    alpha0 = alpha - m + 1

    def head(t, y, i):
        out = np.empty(dim)
        out[: dim - d] = y[d:]
        out[dim - d :] = top0 + i
        return out

    def head_dy(t, y, i):
        jac = np.zeros((dim, dim))
        idx = np.arange(dim - d)
        jac[idx, idx + d] = 1.0
        return jac

    def head_di(t, y, i):
        di = np.zeros((dim, d))
        di[dim - d :, :] = np.eye(d)
        return di

    terms = tuple(
        IntegralTerm(
            alpha=alpha0,
            g=(lambda t, y, j=j: float(np.atleast_1d(f(t, y[:d]))[j])),
            dg_dy=(
                lambda t, y, j=j: np.concatenate(
                    [np.atleast_2d(df_dy(t, y[:d]))[j], np.zeros(dim - d)]
                )
            ),
        )
        for j in range(d)
    )

    def g_all(t, y):
        return np.atleast_1d(f(t, y[:d]))

    def dg_all(t, y):
        out = np.zeros((d, dim))
        out[:, :d] = np.atleast_2d(df_dy(t, y[:d]))
        return out

    state0 = np.concatenate([y0] + [np.asarray(v, dtype=float) for v in derivs0[:-1]])
    return FractionalIVP(
        dim=dim,
        mass_diag=np.ones(dim),
        f=head,
        df_dy=head_dy,
        df_di=head_di,
        integrals=terms,
        y0=state0,
        t_span=(0.0, t_end),
        g_all=g_all,
        dg_all=dg_all,
        name=name,
        exact=exact,
        params={"alpha": alpha},
    )


def attach_integral_output(p: FractionalIVP, j: int) -> FractionalIVP:
    """Expose integral j as an extra algebraic state.

    Appends one variable w and one equation 0 = I_j - w to the problem, so
    the solver reports the integral's trajectory alongside y.
    """
    if not 0 <= j < p.n_integrals:
        raise IndexError(f"integral index {j} out of range (d_I = {p.n_integrals})")
    if p.bandwidths is not None:
        raise ValueError("attach_integral_output supports dense problems only")
    d = p.dim

    def f(t, y, i):
        out = np.empty(d + 1)
        out[:d] = p.f(t, y[:d], i)
        out[d] = i[j] - y[d]
        return out

    def df_dy(t, y, i):
        jac = np.zeros((d + 1, d + 1))
        jac[:d, :d] = p.df_dy(t, y[:d], i)
        jac[d, d] = -1.0
        return jac

    def df_di(t, y, i):
        di = np.zeros((d + 1, p.n_integrals))
        di[:d, :] = p.df_di(t, y[:d], i)
        di[d, j] = 1.0
        return di

    def wrap_term(term):
        return IntegralTerm(
            alpha=term.alpha,
            g=lambda t, y, g=term.g: g(t, y[:d]),
            dg_dy=lambda t, y, dg=term.dg_dy: np.concatenate([dg(t, y[:d]), [0.0]]),
        )

    g_all = None if p.g_all is None else (lambda t, y: p.g_all(t, y[:d]))
    dg_all = None
    if p.dg_all is not None:
        dg_all = lambda t, y: np.hstack(
            [p.dg_all(t, y[:d]), np.zeros((p.n_integrals, 1))]
        )

    return replace(
        p,
        dim=d + 1,
        mass_diag=np.concatenate([p.mass_diag, [0.0]]),
        f=f,
        df_dy=df_dy,
        df_di=df_di,
        integrals=tuple(wrap_term(t) for t in p.integrals),
        y0=np.concatenate([p.y0, [0.0]]),
        g_all=g_all,
        dg_all=dg_all,
    )


def check_initial_consistency(p: FractionalIVP, tol: float = 1e-8) -> None:
    """Verify algebraic rows vanish at t = 0 with all integrals zero.

    Differential-algebraic problems need consistent initial data; raises
    ValueError naming the offending rows otherwise.
    """
    alg = np.flatnonzero(p.mass_diag == 0.0)
    if alg.size == 0:
        return
    resid = np.asarray(p.f(p.t_span[0], p.y0, np.zeros(p.n_integrals)), dtype=float)
    bad = alg[np.abs(resid[alg]) > tol]
    if bad.size:
        worst = np.abs(resid[bad]).max()
        raise ValueError(
            f"initial values are inconsistent: algebraic rows {bad.tolist()} "
            f"have residual up to {worst:.3e} (tolerance {tol:.1e})"
        )
