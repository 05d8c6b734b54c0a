"""Built-in benchmark problems with known solutions or reference values.

Five families exercise the full feature surface: a scalar nonlinear
equation with a closed-form solution (example1), a two-species oscillator
mixing orders above and below one (brusselator), a linear four-state DAE
combining two memory terms (multiterm), one-dimensional diffusion with
memory and banded structure (pde1d), and a three-species reaction-diffusion
system in two state orderings (reaction_diffusion).

Builders return plain FractionalIVP instances; the module-level REGISTRY
maps names to machine-readable descriptors consumed by the command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as _gamma

from .problem import (
    FractionalIVP,
    IntegralTerm,
    from_caputo_integral,
    from_caputo_volt2,
)

__all__ = [
    "BenchmarkSpec",
    "REGISTRY",
    "available",
    "get_spec",
    "build_problem",
    "example1",
    "brusselator",
    "multiterm",
    "multiterm_characteristic_roots",
    "multiterm_critical_alpha",
    "pde1d",
    "reaction_diffusion",
]


@dataclass(frozen=True)
class BenchmarkSpec:
    """Machine-readable descriptor of one built-in problem.

    parameters maps tunable keyword names to their defaults; these are
    exactly the keywords build() accepts.  constants records values baked
    into the builder.  exact_solution and reference_values are mutually
    exclusive sources of truth: a problem is judged either against a
    closed form or against tagged reference constants.
    """

    name: str
    parameters: dict
    build: Callable
    constants: dict = field(default_factory=dict)
    exact_solution: Optional[Callable] = None
    reference_values: Optional[dict] = None
    description: str = ""

    def __post_init__(self):
        if self.exact_solution is not None and self.reference_values is not None:
            raise ValueError(
                f"{self.name}: exact solution and reference values are exclusive"
            )

    def describe(self) -> dict:
        if self.exact_solution is not None:
            truth = "exact"
        elif self.reference_values is not None:
            truth = "reference"
        else:
            truth = "none"
        return {
            "name": self.name,
            "parameters": dict(self.parameters),
            "constants": dict(self.constants),
            "truth": truth,
            "description": self.description,
        }


def example1(
    alpha: float = 0.5, formulation: str = "auto", t_end: float = 1.0
) -> FractionalIVP:
    """Scalar nonlinear benchmark with exact solution (1.5 t^(a/2) - t^4)^2.

    The right-hand side pairs a fractional-power inhomogeneity with the
    superlinear damping -y^(3/2), extended oddly so it stays meaningful
    when iterates undershoot zero.  Any positive non-integer order is
    accepted; the intended range ends at T = 1.

    formulation selects the first-order rewrite for alpha > 1: "volt1"
    keeps y itself under the memory integral (all-algebraic fixed point),
    "volt2" differentiates so the integral feeds the highest classical
    derivative, "auto" picks volt1 below 1.5 and volt2 from there up.
    """
    if alpha <= 0.0 or (alpha >= 1.0 and alpha == math.floor(alpha)):
        raise ValueError(
            f"alpha must be positive and non-integer above 1, got {alpha}"
        )
    a2 = alpha / 2.0
    c_lead = 2.25 * _gamma(1.0 + alpha)
    c_mid = -3.0 * _gamma(5.0 + a2) / _gamma(5.0 - a2)
    c_high = _gamma(9.0) / _gamma(9.0 - alpha)

    def source(t):
        w = 1.5 * t**a2 - t**4
        return c_lead + c_mid * t ** (4.0 - a2) + c_high * t ** (8.0 - alpha) + w**3

    def f(t, y):
        v = y[0]
        return np.array([source(t) - math.copysign(abs(v) ** 1.5, v)])

    def df_dy(t, y):
        return np.atleast_2d(-1.5 * np.sqrt(np.abs(y)))

    def exact(t):
        return np.atleast_1d((1.5 * t**a2 - t**4) ** 2)

    mode = formulation
    if mode == "auto":
        # volt1 is the better default near 1, volt2 near 2
        mode = "volt1" if alpha < 1.5 else "volt2"
    if mode not in ("volt1", "volt2"):
        raise ValueError(
            f"unknown formulation {formulation!r}; use volt1, volt2 or auto"
        )
    m = math.ceil(alpha)
    derivs0 = [np.zeros(1)] * (m - 1)  # solution is flat to first order at 0
    if mode == "volt1":
        p = from_caputo_integral(
            alpha, f, df_dy, y0=[0.0], derivs0=derivs0, t_end=t_end,
            name="example1", exact=exact,
        )
    else:
        if alpha < 1.0:
            raise ValueError(
                "formulation volt2 needs alpha > 1; below one the "
                "fixed-point form is the only rewrite"
            )
        # auxiliary derivative states for m > 2 have no wired closed form
        p = from_caputo_volt2(
            alpha, f, df_dy, y0=[0.0], derivs0=derivs0, t_end=t_end,
            name="example1", exact=exact if m == 2 else None,
        )
    p.params.update(
        formulation=mode, t_max=(3.0 * alpha / 16.0) ** (1.0 / (4.0 - a2))
    )
    return p


def brusselator(t_end: float = 220.0) -> FractionalIVP:
    """Two-species oscillator with derivative orders 1.3 and 0.8.

    The first component keeps its classical derivative and receives the
    memory of order 0.3 through the differentiated rewrite (y1'(0) = 1);
    the second is algebraic in the fixed-point form.  With A = 1, B = 3
    the equilibrium is unstable and trajectories settle on a limit cycle.
    """
    A, B = 1.0, 3.0
    y10, y20, dy10 = 1.2, 2.8, 1.0

    def f(t, y, i):
        return np.array([dy10 + i[0], y20 + i[1] - y[1]])

    def df_dy(t, y, i):
        return np.array([[0.0, 0.0], [0.0, -1.0]])

    def df_di(t, y, i):
        return np.eye(2)

    def g_all(t, y):
        prod = y[0] * y[0] * y[1]
        return np.array([A - (B + 1.0) * y[0] + prod, B * y[0] - prod])

    def dg_all(t, y):
        return np.array(
            [
                [-(B + 1.0) + 2.0 * y[0] * y[1], y[0] * y[0]],
                [B - 2.0 * y[0] * y[1], -y[0] * y[0]],
            ]
        )

    terms = (
        IntegralTerm(
            0.3, lambda t, y: float(g_all(t, y)[0]), lambda t, y: dg_all(t, y)[0]
        ),
        IntegralTerm(
            0.8, lambda t, y: float(g_all(t, y)[1]), lambda t, y: dg_all(t, y)[1]
        ),
    )
    return FractionalIVP(
        dim=2,
        mass_diag=np.array([1.0, 0.0]),
        f=f,
        df_dy=df_dy,
        df_di=df_di,
        integrals=terms,
        y0=np.array([y10, y20]),
        t_span=(0.0, t_end),
        g_all=g_all,
        dg_all=dg_all,
        name="brusselator",
        params={"A": A, "B": B, "alpha1": 1.3, "alpha2": 0.8, "dy1_0": dy10},
    )


BRUSSELATOR_REFERENCE = {
    "conditions": {"t_end": 220.0},
    "y": (1.0097684171, 2.1581264031),
}


def multiterm(alpha: float = 0.5, t_end: float = 5000.0) -> FractionalIVP:
    """Linear four-state DAE combining memory orders alpha and alpha + 2.

    First-order rewrite of

        y''' + D^(alpha+2) y + y'' + 4 y' + D^alpha y + 4 y = 6 cos t

    with states (y, y', y'', y''') and an algebraic last row.  Both memory
    integrals share the order 1 - alpha: one integrates y', the other
    y'''.  The exact solution sqrt(2) sin(t + pi/4) holds for every alpha
    in (0, 1); boundedness of perturbations does not, see
    multiterm_critical_alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    mu = 1.0 - alpha

    def f(t, y, i):
        return np.array(
            [
                y[1],
                y[2],
                y[3],
                6.0 * math.cos(t) - y[3] - i[1] - y[2] - 4.0 * y[1] - i[0] - 4.0 * y[0],
            ]
        )

    jac = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-4.0, -4.0, -1.0, -1.0],
        ]
    )
    dfi = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, -1.0]])

    def df_dy(t, y, i):
        return jac

    def df_di(t, y, i):
        return dfi

    def g_all(t, y):
        return np.array([y[1], y[3]])

    def dg_all(t, y):
        return np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    terms = (
        IntegralTerm(mu, lambda t, y: float(y[1]), lambda t, y: dg_all(t, y)[0]),
        IntegralTerm(mu, lambda t, y: float(y[3]), lambda t, y: dg_all(t, y)[1]),
    )

    def exact(t):
        s, c = math.sin(t), math.cos(t)
        return np.array([s + c, c - s, -s - c, s - c])

    return FractionalIVP(
        dim=4,
        mass_diag=np.array([1.0, 1.0, 1.0, 0.0]),
        f=f,
        df_dy=df_dy,
        df_di=df_di,
        integrals=terms,
        y0=np.array([1.0, 1.0, -1.0, -1.0]),
        t_span=(0.0, t_end),
        g_all=g_all,
        dg_all=dg_all,
        name="multiterm",
        exact=exact,
        params={"alpha": alpha},
    )


def _char_poly(z: complex, alpha: float) -> complex:
    return z ** (alpha + 2.0) + z**alpha + z**3 + z**2 + 4.0 * z + 4.0


def _char_dpoly(z: complex, alpha: float) -> complex:
    return (
        (alpha + 2.0) * z ** (alpha + 1.0)
        + alpha * z ** (alpha - 1.0)
        + 3.0 * z**2
        + 2.0 * z
        + 4.0
    )


def multiterm_characteristic_roots(
    alpha: float,
    seeds=(1.65686j, -1.65686j),
    tol: float = 1e-13,
    max_iter: int = 60,
) -> np.ndarray:
    """Newton refinement of the root pair of the homogeneous symbol.

    The multiterm problem is asymptotically stable exactly when every
    root of z^(alpha+2) + z^alpha + z^3 + z^2 + 4z + 4 (principal branch)
    stays in the open left half-plane.  The pair that crosses sits near
    +-1.65686i; other roots stay safely left for alpha in (0, 1).
    """
    roots = []
    for z in seeds:
        z = complex(z)
        for _ in range(max_iter):
            step = _char_poly(z, alpha) / _char_dpoly(z, alpha)
            z -= step
            if abs(step) <= tol * max(1.0, abs(z)):
                break
        roots.append(z)
    return np.array(roots)


def multiterm_critical_alpha(
    lo: float = 0.60, hi: float = 0.70, tol: float = 1e-7
) -> float:
    """Bisect for the order where the root pair enters the right half-plane."""
    def growth(alpha):
        return multiterm_characteristic_roots(alpha).real.max()

    if not growth(lo) < 0.0 < growth(hi):
        raise ValueError(f"bracket [{lo}, {hi}] does not straddle the crossing")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if growth(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pde1d(
    alpha: float = 1.0 / 3.0,
    beta: float = 5.0 / 3.0,
    d: int = 100,
    t_end: float = 1000.0,
) -> FractionalIVP:
    """Diffusion with memory on the unit interval, exact quadratic profile.

    Semi-discretization of D^alpha u = u_xx + q(x, t) on x_j = j/(d+1)
    with zero boundary values, forced so that u(x, t) = x(1-x)(t^beta+1)/2
    solves the continuous and the discretized equation alike (the profile
    is quadratic in x, which central differences reproduce exactly).  One
    memory integral per grid point; everything couples through a
    tridiagonal band.

    Below order one the formulation is the algebraic fixed point
    u = u(0) + J^alpha G; between one and two the differentiated rewrite
    u' = J^(alpha-1) G applies (u_t(x, 0) = 0 since beta > 1 there).
    """
    if not 0.0 < alpha < 2.0 or alpha == 1.0:
        raise ValueError(f"alpha must lie in (0, 1) or (1, 2), got {alpha}")
    if beta < alpha:
        raise ValueError(f"beta must be at least alpha, got beta={beta}")
    if d < 2:
        raise ValueError(f"need at least two grid points, got d={d}")

    x = np.arange(1, d + 1) / (d + 1.0)
    inv_h2 = float((d + 1) ** 2)
    profile = 0.5 * x * (1.0 - x)
    c_force = _gamma(beta + 1.0) / _gamma(beta + 1.0 - alpha)

    def lap(v):
        out = -2.0 * v
        out[:-1] += v[1:]
        out[1:] += v[:-1]
        return inv_h2 * out

    def g_all(t, y):
        return lap(y) + profile * (c_force * t ** (beta - alpha)) + (t**beta + 1.0)

    # constant integrand Jacobian; shared array, treated read-only downstream
    win = np.tile(np.array([inv_h2, -2.0 * inv_h2, inv_h2]), (d, 1))
    win[0, 0] = 0.0
    win[-1, -1] = 0.0

    def dg_all(t, y):
        return win

    def exact(t):
        return profile * (t**beta + 1.0)

    if alpha < 1.0:
        mass = np.zeros(d)
        term_alpha = alpha

        def f(t, y, i):
            return profile + i - y

        band = np.zeros((3, d))
        band[1] = -1.0
    else:
        mass = np.ones(d)
        term_alpha = alpha - 1.0

        def f(t, y, i):
            return i

        band = np.zeros((3, d))
    ones_d = np.ones(d)

    def df_dy(t, y, i):
        return band

    def df_di(t, y, i):
        return ones_d

    def term_g(j):
        def g(t, y):
            acc = -2.0 * y[j]
            if j > 0:
                acc += y[j - 1]
            if j + 1 < d:
                acc += y[j + 1]
            return (
                inv_h2 * acc
                + profile[j] * (c_force * t ** (beta - alpha))
                + (t**beta + 1.0)
            )

        return g

    terms = tuple(
        IntegralTerm(term_alpha, term_g(j), (lambda t, y, j=j: win[j]))
        for j in range(d)
    )
    return FractionalIVP(
        dim=d,
        mass_diag=mass,
        f=f,
        df_dy=df_dy,
        df_di=df_di,
        integrals=terms,
        y0=profile.copy(),
        t_span=(0.0, t_end),
        bandwidths=(1, 1),
        term_rows=np.arange(d),
        g_all=g_all,
        dg_all=dg_all,
        name="pde1d",
        exact=exact,
        params={"alpha": alpha, "beta": beta, "d": d},
    )


def reaction_diffusion(
    alpha: float = 0.5,
    d: int = 100,
    ordering: str = "by-gridpoint",
    t_end: float = 30.0,
) -> FractionalIVP:
    """Three interacting species diffusing on the unit interval.

    D^alpha u_s = K (u_s)_xx + reactions, where u1 + u2 bind to u3 at rate
    k1, u3 releases both at rate k2 and returns u1 alone at rate k3.
    Fixed-point formulation with one memory integral per unknown, 3d
    unknowns in total, zero boundary values.

    ordering picks the state layout and with it the declared bandwidth:
    "by-gridpoint" interleaves species, making the exact Jacobian a band
    with b_l = b_u = 3; "by-species" stacks species blocks and keeps only
    the tridiagonal within-species part (diffusion plus same-species
    reaction derivative), handing the integrator an approximate Jacobian
    while the right-hand side stays exact.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if d < 2:
        raise ValueError(f"need at least two grid points, got d={d}")
    if ordering not in ("by-species", "by-gridpoint"):
        raise ValueError(
            f"unknown ordering {ordering!r}; use by-species or by-gridpoint"
        )

    K, k1, k2, k3 = 0.5, 1.0, 2.0, 3.0
    x = np.arange(1, d + 1) / (d + 1.0)
    inv_h2 = float((d + 1) ** 2)
    dim = 3 * d
    if ordering == "by-species":
        sl = (slice(0, d), slice(d, 2 * d), slice(2 * d, 3 * d))
        bw = (1, 1)
    else:
        sl = (slice(0, dim, 3), slice(1, dim, 3), slice(2, dim, 3))
        bw = (3, 3)

    y_init = np.empty(dim)
    y_init[sl[0]] = 0.5 * x * (1.0 - x)
    y_init[sl[1]] = x * x * (1.0 - x)
    y_init[sl[2]] = 1.5 * x * (1.0 - x) ** 2

    def lap(v):
        out = -2.0 * v
        out[:-1] += v[1:]
        out[1:] += v[:-1]
        return inv_h2 * out

    def g_all(t, y):
        u1, u2, u3 = y[sl[0]], y[sl[1]], y[sl[2]]
        bind = k1 * u1 * u2
        out = np.empty(dim)
        out[sl[0]] = K * lap(u1) - bind + (k2 + k3) * u3
        out[sl[1]] = K * lap(u2) - bind + k2 * u3
        out[sl[2]] = K * lap(u3) + bind - (k2 + k3) * u3
        return out

    diff = K * inv_h2
    mid = -2.0 * diff
    if ordering == "by-species":

        def dg_all(t, y):
            u1, u2 = y[sl[0]], y[sl[1]]
            win = np.full((dim, 3), diff)
            win[0 * d : 1 * d, 1] = mid - k1 * u2
            win[1 * d : 2 * d, 1] = mid - k1 * u1
            win[2 * d : 3 * d, 1] = mid - (k2 + k3)
            win[0::d, 0] = 0.0  # species blocks do not touch across seams
            win[d - 1 :: d, 2] = 0.0
            return win

    else:

        def dg_all(t, y):
            u1, u2 = y[sl[0]], y[sl[1]]
            win = np.zeros((dim, 7))
            win[:, 0] = diff
            win[:, 6] = diff
            win[0:3, 0] = 0.0  # no neighbors past the walls
            win[dim - 3 :, 6] = 0.0
            # same-gridpoint reaction derivatives, species rows interleaved
            win[0::3, 3] = mid - k1 * u2
            win[0::3, 4] = -k1 * u1
            win[0::3, 5] = k2 + k3
            win[1::3, 2] = -k1 * u2
            win[1::3, 3] = mid - k1 * u1
            win[1::3, 4] = k2
            win[2::3, 1] = k1 * u2
            win[2::3, 2] = k1 * u1
            win[2::3, 3] = mid - (k2 + k3)
            return win

    def f(t, y, i):
        return y_init + i - y

    band = np.zeros((bw[0] + bw[1] + 1, dim))
    band[bw[1]] = -1.0
    ones_dim = np.ones(dim)

    def df_dy(t, y, i):
        return band

    def df_di(t, y, i):
        return ones_dim

    terms = tuple(
        IntegralTerm(
            alpha,
            (lambda t, y, r=r: float(g_all(t, y)[r])),
            (lambda t, y, r=r: dg_all(t, y)[r]),
        )
        for r in range(dim)
    )
    return FractionalIVP(
        dim=dim,
        mass_diag=np.zeros(dim),
        f=f,
        df_dy=df_dy,
        df_di=df_di,
        integrals=terms,
        y0=y_init.copy(),
        t_span=(0.0, t_end),
        bandwidths=bw,
        term_rows=np.arange(dim),
        g_all=g_all,
        dg_all=dg_all,
        name="reaction_diffusion",
        params={
            "alpha": alpha, "d": d, "ordering": ordering,
            "K": K, "k1": k1, "k2": k2, "k3": k3,
        },
    )


REACTION_DIFFUSION_REFERENCE = {
    "conditions": {"d": 1000, "alpha": 0.5, "t_end": 30.0, "tol": 1e-5, "eps": 1e-5},
    "by-species": {"nstep": 29, "nfcn": 274, "njac": 29},
    "by-gridpoint": {"nstep": 28, "nfcn": 183, "njac": 4},
}


REGISTRY = {
    spec.name: spec
    for spec in (
        BenchmarkSpec(
            name="example1",
            parameters={"alpha": 0.5, "formulation": "auto", "t_end": 1.0},
            build=example1,
            exact_solution=lambda t, alpha=0.5: (1.5 * t ** (alpha / 2.0) - t**4)
            ** 2,
            description="scalar nonlinear equation with closed-form solution",
        ),
        BenchmarkSpec(
            name="brusselator",
            parameters={"t_end": 220.0},
            build=brusselator,
            constants={"A": 1.0, "B": 3.0, "alpha1": 1.3, "alpha2": 0.8},
            reference_values=BRUSSELATOR_REFERENCE,
            description="two-species limit-cycle oscillator, orders 1.3 and 0.8",
        ),
        BenchmarkSpec(
            name="multiterm",
            parameters={"alpha": 0.5, "t_end": 5000.0},
            build=multiterm,
            exact_solution=lambda t: math.sqrt(2.0) * math.sin(t + math.pi / 4.0),
            description="four-state linear DAE with two shared-order memory terms",
        ),
        BenchmarkSpec(
            name="pde1d",
            parameters={
                "alpha": 1.0 / 3.0, "beta": 5.0 / 3.0, "d": 100, "t_end": 1000.0,
            },
            build=pde1d,
            exact_solution=lambda t, x, beta=5.0 / 3.0: 0.5
            * x
            * (1.0 - x)
            * (t**beta + 1.0),
            description="1D diffusion with memory, banded, exact quadratic profile",
        ),
        BenchmarkSpec(
            name="reaction_diffusion",
            parameters={
                "alpha": 0.5, "d": 100, "ordering": "by-gridpoint", "t_end": 30.0,
            },
            build=reaction_diffusion,
            constants={"K": 0.5, "k1": 1.0, "k2": 2.0, "k3": 3.0},
            reference_values=REACTION_DIFFUSION_REFERENCE,
            description="three-species reaction-diffusion, exact or truncated band",
        ),
    )
}


def available() -> list:
    """Sorted names of the built-in problems."""
    return sorted(REGISTRY)


def get_spec(name: str) -> BenchmarkSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(available())}"
        ) from None


def build_problem(name: str, **overrides) -> FractionalIVP:
    """Build a registered problem with keyword overrides of its defaults."""
    spec = get_spec(name)
    unknown = sorted(set(overrides) - set(spec.parameters))
    if unknown:
        raise ValueError(
            f"{name} does not take parameter(s) {', '.join(unknown)}; "
            f"accepted: {', '.join(sorted(spec.parameters))}"
        )
    kw = dict(spec.parameters)
    kw.update(overrides)
    return spec.build(**kw)
