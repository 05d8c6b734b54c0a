"""Shared test helpers."""

import numpy as np

from fracode.augment import AugmentedSystem, BlockSpec, StructuredJacobian
from fracode.problem import FractionalIVP, IntegralTerm


def random_arrow_instance(rng):
    """One random small arrow system: (AugmentedSystem, StructuredJacobian, mass).

    Head dimension 1..5, one to three memory blocks with chain lengths up
    to 3, a mix of differential and algebraic head rows.  The head, the
    coupling columns and the coupling rows are dense gaussian draws; decay
    rates and weights are positive, as the augmentation produces them.
    """
    d = int(rng.integers(1, 6))
    nt = int(rng.integers(1, 4))
    blocks = []
    for _ in range(nt):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(2, 9))
        gam = np.sort(rng.uniform(0.05, 50.0, n))
        w = rng.uniform(0.1, 2.0, n)
        pref = float(rng.uniform(0.3, 3.0))
        blocks.append(BlockSpec(m=m, n=n, weights=w, exponents=gam, prefactor=pref))
    mass_head = (rng.uniform(size=d) > 0.4).astype(float)
    base = FractionalIVP(
        dim=d,
        mass_diag=mass_head,
        f=lambda t, y, i: np.zeros(d),
        df_dy=lambda t, y, i: np.zeros((d, d)),
        df_di=lambda t, y, i: np.zeros((d, nt)),
        integrals=tuple(
            IntegralTerm(0.5, lambda t, y: 0.0, lambda t, y: np.zeros(d))
            for _ in range(nt)
        ),
        y0=np.zeros(d),
        t_span=(0.0, 1.0),
    )
    sys = AugmentedSystem(base, blocks, 1e-8)
    J = StructuredJacobian(
        head=rng.standard_normal((d, d)),
        cols=rng.standard_normal((d, nt)),
        rows=rng.standard_normal((nt, d)),
        bandwidths=None,
        term_rows=None,
        sys=sys,
    )
    mass = np.concatenate([mass_head, np.ones(sys.aux_dim)])
    return sys, J, mass


def random_shift(rng, complex_shift):
    if complex_shift:
        return complex(rng.uniform(0.5, 50.0), rng.uniform(-30.0, 30.0))
    return float(rng.uniform(0.5, 50.0))


def classical_ivp(f, df, y0, t_end, mass=None):
    """A plain ODE/DAE with no memory terms, M y' = f(t, y)."""
    y0 = np.asarray(y0, dtype=float)
    d = len(y0)
    return FractionalIVP(
        dim=d,
        mass_diag=np.ones(d) if mass is None else np.asarray(mass, dtype=float),
        f=lambda t, y, i: f(t, y),
        df_dy=lambda t, y, i: df(t, y),
        df_di=lambda t, y, i: np.zeros((d, 0)),
        integrals=(),
        y0=y0,
        t_span=(0.0, t_end),
    )
