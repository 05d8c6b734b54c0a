"""Benchmark problem definitions checked against independent math.

The builders are trusted nowhere: closed-form solutions are re-verified
through a product-trapezoid fractional integral computed here from
scratch, Jacobian windows are compared with difference quotients, and the
stability analysis of the multiterm problem is checked against its own
characteristic polynomial.
"""

import math

import numpy as np
import pytest
from scipy.special import gamma as sgamma

from fracode.bench_problems import (
    BRUSSELATOR_REFERENCE,
    REACTION_DIFFUSION_REFERENCE,
    REGISTRY,
    BenchmarkSpec,
    available,
    brusselator,
    build_problem,
    example1,
    get_spec,
    multiterm,
    multiterm_characteristic_roots,
    multiterm_critical_alpha,
    pde1d,
    reaction_diffusion,
)
from fracode.problem import check_initial_consistency


def frac_integral_trap(alpha, g, t_end, n):
    """Order-alpha integral of g on [0, t_end] by the product trapezoid rule.

    Piecewise-linear interpolation of the integrand against the exact
    power-law weight, n uniform panels.  Second-order accurate for smooth
    integrands; used as the ground-truth quadrature in this file.
    """
    h = t_end / n
    j = np.arange(n + 1)
    gv = np.array([g(tj) for tj in h * j])
    coef = h**alpha / sgamma(alpha + 2.0)
    nn = n
    b = np.empty(n + 1)
    b[0] = (nn - 1.0) ** (alpha + 1.0) - nn**alpha * (nn - alpha - 1.0)
    k = np.arange(1, n)
    b[1:n] = (
        (nn - k + 1.0) ** (alpha + 1.0)
        + (nn - k - 1.0) ** (alpha + 1.0)
        - 2.0 * (nn - k) ** (alpha + 1.0)
    )
    b[n] = 1.0
    return coef * float(b @ gv)


# --- registry ---------------------------------------------------------


def test_available_sorted_and_complete():
    names = available()
    assert names == sorted(names)
    assert names == [
        "brusselator", "example1", "multiterm", "pde1d", "reaction_diffusion",
    ]


def test_get_spec_unknown_name():
    with pytest.raises(KeyError, match="unknown problem 'heat3d'"):
        get_spec("heat3d")
    try:
        get_spec("heat3d")
    except KeyError as exc:
        for name in available():
            assert name in str(exc)


def test_build_problem_overrides_and_rejects():
    p = build_problem("example1", t_end=2.5)
    assert p.t_span == (0.0, 2.5)
    with pytest.raises(ValueError, match="does not take parameter"):
        build_problem("example1", beta=1.0)
    with pytest.raises(ValueError, match="accepted: alpha, formulation, t_end"):
        build_problem("example1", beta=1.0)


def test_describe_fields():
    d = get_spec("brusselator").describe()
    assert d["name"] == "brusselator"
    assert d["truth"] == "reference"
    assert d["parameters"] == {"t_end": 220.0}
    assert d["constants"]["B"] == 3.0
    assert d["description"]
    assert get_spec("example1").describe()["truth"] == "exact"


def test_exact_and_reference_exclusive():
    with pytest.raises(ValueError, match="exclusive"):
        BenchmarkSpec(
            name="bad",
            parameters={},
            build=lambda: None,
            exact_solution=lambda t: t,
            reference_values={"y": 1.0},
        )


def test_registry_builders_match_descriptors():
    for name, spec in REGISTRY.items():
        p = spec.build(**spec.parameters)
        assert p.name == name
        assert p.dim >= 1
        assert len(p.y0) == p.dim


# --- example1 ---------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
def test_example1_exact_satisfies_volterra_equation(alpha):
    # y = J^alpha g(., y(.)) with y(0) = 0: reconstruct the right side by
    # quadrature and compare at the endpoint where the solution is O(1)
    p = example1(alpha=alpha)
    ex = p.exact

    def integrand(t):
        return float(p.eval_g(t, ex(t))[0])

    lhs = float(ex(1.0)[0])
    rhs = frac_integral_trap(alpha, integrand, 1.0, 4000)
    assert abs(rhs - lhs) < 5e-5 * max(1.0, abs(lhs))


def test_example1_interior_maximum():
    p = example1(alpha=0.5)
    tm = p.params["t_max"]
    assert tm == pytest.approx((3.0 * 0.5 / 16.0) ** (1.0 / 3.75))
    # stationary point of the inner profile 1.5 t^(a/2) - t^4
    a2 = 0.25
    assert 1.5 * a2 * tm ** (a2 - 1.0) - 4.0 * tm**3 == pytest.approx(0.0, abs=1e-12)
    ex = lambda t: float(p.exact(t)[0])
    assert ex(tm) > ex(tm * 0.999)
    assert ex(tm) > ex(tm * 1.001)


def test_example1_rhs_odd_extension():
    p = example1()
    t = 0.37
    base = float(p.eval_g(t, np.array([0.0]))[0])
    # -y^(3/2) continued oddly: negative iterates raise the right side
    assert float(p.eval_g(t, np.array([-0.04]))[0]) == pytest.approx(base + 0.04**1.5)
    assert float(p.eval_g(t, np.array([0.04]))[0]) == pytest.approx(base - 0.04**1.5)
    for v in (0.3, -0.3):
        y = np.array([v])
        eps = 1e-6
        fd = (p.eval_g(t, y + eps) - p.eval_g(t, y - eps)) / (2 * eps)
        assert float(p.eval_dg(t, y)[0, 0]) == pytest.approx(float(fd[0]), rel=1e-5)


def test_example1_formulation_selection():
    assert example1(alpha=0.5).params["formulation"] == "volt1"
    assert example1(alpha=1.49, formulation="auto").params["formulation"] == "volt1"
    assert example1(alpha=1.5).params["formulation"] == "volt2"
    assert example1(alpha=1.2, formulation="volt2").params["formulation"] == "volt2"
    # differentiated rewrite keeps the closed form only while the extra
    # states are plain derivatives of it
    assert example1(alpha=1.5, formulation="volt2").exact is not None
    assert example1(alpha=2.5, formulation="volt2").exact is None


def test_example1_validation():
    for bad in (0.0, -0.5, 1.0, 2.0):
        with pytest.raises(ValueError, match="alpha must be positive"):
            example1(alpha=bad)
    with pytest.raises(ValueError, match="unknown formulation"):
        example1(formulation="volt3")
    with pytest.raises(ValueError, match="needs alpha > 1"):
        example1(alpha=0.5, formulation="volt2")


# --- brusselator ------------------------------------------------------


def test_brusselator_jacobian_consistency():
    p = brusselator()
    rng = np.random.default_rng(11)
    for _ in range(5):
        y = rng.uniform(0.3, 3.0, 2)
        J = p.dg_all(0.0, y)
        eps = 1e-6
        for c in range(2):
            e = np.zeros(2)
            e[c] = eps
            fd = (p.g_all(0.0, y + e) - p.g_all(0.0, y - e)) / (2 * eps)
            np.testing.assert_allclose(J[:, c], fd, rtol=1e-6, atol=1e-8)
    # per-term callables agree with the stacked forms
    for k, term in enumerate(p.integrals):
        y = rng.uniform(0.3, 3.0, 2)
        assert term.g(0.0, y) == pytest.approx(float(p.g_all(0.0, y)[k]))
        np.testing.assert_allclose(term.dg_dy(0.0, y), p.dg_all(0.0, y)[k])
    assert [t.alpha for t in p.integrals] == [0.3, 0.8]


def test_brusselator_initial_state_consistent():
    p = brusselator()
    check_initial_consistency(p)
    np.testing.assert_array_equal(p.mass_diag, [1.0, 0.0])
    assert BRUSSELATOR_REFERENCE["conditions"]["t_end"] == p.t_span[1]
    assert len(BRUSSELATOR_REFERENCE["y"]) == 2


# --- multiterm --------------------------------------------------------


def test_multiterm_exact_kills_memory_terms():
    # the closed form obeys y + y'' = 0, so the two integrands y' and y'''
    # cancel pointwise and the memory contribution vanishes as a pair
    p = multiterm(alpha=0.37)
    rng = np.random.default_rng(3)
    for t in rng.uniform(0.0, 50.0, 12):
        ye = p.exact(t)
        g = p.g_all(t, ye)
        assert abs(g.sum()) < 1e-13 * max(1.0, np.abs(g).max())


def test_multiterm_exact_satisfies_classical_part():
    # with the memory pair cancelled, the last row must vanish for any
    # common integral value a fed as (a, -a)
    p = multiterm(alpha=0.61)
    rng = np.random.default_rng(4)
    for t in rng.uniform(0.0, 40.0, 8):
        ye = p.exact(t)
        for a in (0.0, 0.7, -2.3):
            r = p.f(t, ye, np.array([a, -a]))
            assert abs(r[3]) < 1e-12
            # first three rows reproduce the chain of derivatives
            np.testing.assert_allclose(r[:3], ye[1:], atol=1e-14)


def test_multiterm_structure():
    p = multiterm()
    np.testing.assert_array_equal(p.mass_diag, [1.0, 1.0, 1.0, 0.0])
    np.testing.assert_array_equal(p.y0, [1.0, 1.0, -1.0, -1.0])
    assert [t.alpha for t in p.integrals] == [0.5, 0.5]
    check_initial_consistency(p)
    with pytest.raises(ValueError, match="alpha must lie in"):
        multiterm(alpha=1.0)


def test_multiterm_characteristic_roots():
    def sym(z, alpha):
        return z ** (alpha + 2) + z**alpha + z**3 + z**2 + 4 * z + 4

    for alpha in (0.4, 0.5, 0.655, 0.7):
        r = multiterm_characteristic_roots(alpha)
        assert r.shape == (2,)
        assert abs(sym(r[0], alpha)) < 1e-10
        assert abs(sym(r[1], alpha)) < 1e-10
        assert r[1] == pytest.approx(np.conj(r[0]))
    assert multiterm_characteristic_roots(0.5).real.max() < 0.0
    assert multiterm_characteristic_roots(0.7).real.max() > 0.0


def test_multiterm_critical_alpha():
    a_star = multiterm_critical_alpha()
    assert a_star == pytest.approx(0.6542985, abs=1e-5)
    assert multiterm_characteristic_roots(a_star - 1e-3).real.max() < 0.0
    assert multiterm_characteristic_roots(a_star + 1e-3).real.max() > 0.0
    with pytest.raises(ValueError, match="does not straddle"):
        multiterm_critical_alpha(0.1, 0.2)


# --- pde1d ------------------------------------------------------------


@pytest.mark.parametrize("alpha,beta", [(1.0 / 3.0, 5.0 / 3.0), (0.6, 1.8)])
def test_pde1d_laplacian_cancellation(alpha, beta):
    # the profile is quadratic in x, so the discrete Laplacian of the
    # exact solution equals the continuous one and the forcing terms
    # collapse to a single power of t
    d = 37
    p = pde1d(alpha=alpha, beta=beta, d=d)
    x = np.arange(1, d + 1) / (d + 1.0)
    c_force = sgamma(beta + 1.0) / sgamma(beta + 1.0 - alpha)
    for t in (0.3, 2.0, 31.0):
        g = p.g_all(t, p.exact(t))
        want = 0.5 * x * (1.0 - x) * c_force * t ** (beta - alpha)
        np.testing.assert_allclose(g, want, rtol=1e-10, atol=1e-10)


def test_pde1d_exact_is_fixed_point():
    # closed-form check that y0 + J^alpha g(., exact(.)) returns exact:
    # J^alpha t^(beta-alpha) = Gamma(beta-alpha+1)/Gamma(beta+1) t^beta,
    # which cancels the forcing constant identically
    alpha, beta = 1.0 / 3.0, 5.0 / 3.0
    c_force = sgamma(beta + 1.0) / sgamma(beta + 1.0 - alpha)
    assert c_force * sgamma(beta - alpha + 1.0) / sgamma(beta + 1.0) == pytest.approx(
        1.0, rel=1e-14
    )
    # and by quadrature, in case the powers above were transcribed wrong
    val = frac_integral_trap(alpha, lambda t: c_force * t ** (beta - alpha), 1.0, 3000)
    assert val == pytest.approx(1.0, rel=1e-5)


def test_pde1d_jacobian_window():
    d = 9
    p = pde1d(d=d)
    win = p.dg_all(0.0, p.y0)
    assert win.shape == (d, 3)
    inv_h2 = (d + 1) ** 2
    assert win[0, 0] == 0.0 and win[-1, -1] == 0.0
    np.testing.assert_allclose(win[:, 1], -2.0 * inv_h2)
    np.testing.assert_allclose(win[1:, 0], inv_h2)
    # windows verified against difference quotients of the stacked g
    y = np.random.default_rng(5).uniform(0.0, 1.0, d)
    eps = 1e-6
    J = np.empty((d, d))
    for c in range(d):
        e = np.zeros(d)
        e[c] = eps
        J[:, c] = (p.g_all(1.0, y + e) - p.g_all(1.0, y - e)) / (2 * eps)
    for r in range(d):
        for k in range(3):
            c = r - 1 + k
            if 0 <= c < d:
                assert win[r, k] == pytest.approx(J[r, c], abs=1e-3)


def test_pde1d_order_routes():
    low = pde1d(alpha=0.4)
    assert np.all(low.mass_diag == 0.0)
    assert low.integrals[0].alpha == 0.4
    high = pde1d(alpha=1.4)
    assert np.all(high.mass_diag == 1.0)
    assert high.integrals[0].alpha == pytest.approx(0.4)
    # differentiated form feeds the integral straight through
    i = np.linspace(0.0, 1.0, high.dim)
    np.testing.assert_array_equal(high.f(0.5, high.y0, i), i)
    assert high.bandwidths == (1, 1)
    np.testing.assert_array_equal(high.term_rows, np.arange(high.dim))


def test_pde1d_validation():
    with pytest.raises(ValueError, match="alpha must lie in"):
        pde1d(alpha=1.0)
    with pytest.raises(ValueError, match="alpha must lie in"):
        pde1d(alpha=2.3)
    with pytest.raises(ValueError, match="beta must be at least"):
        pde1d(alpha=0.9, beta=0.5)
    with pytest.raises(ValueError, match="at least two grid points"):
        pde1d(d=1)


# --- reaction_diffusion -----------------------------------------------


def _rd_perm(d):
    """Index map: by-gridpoint position of by-species entry s*d + j."""
    perm = np.empty(3 * d, dtype=int)
    for s in range(3):
        for j in range(d):
            perm[s * d + j] = 3 * j + s
    return perm


def test_reaction_diffusion_orderings_are_permutations():
    d = 6
    ps = reaction_diffusion(d=d, ordering="by-species")
    pg = reaction_diffusion(d=d, ordering="by-gridpoint")
    perm = _rd_perm(d)
    np.testing.assert_array_equal(ps.y0, pg.y0[perm])
    rng = np.random.default_rng(8)
    for t in (0.0, 1.5):
        ys = rng.uniform(0.0, 0.5, 3 * d)
        yg = np.empty_like(ys)
        yg[perm] = ys
        np.testing.assert_allclose(
            ps.g_all(t, ys), pg.g_all(t, yg)[perm], rtol=1e-13, atol=1e-13
        )
    assert ps.bandwidths == (1, 1)
    assert pg.bandwidths == (3, 3)


def _window_to_dense(win, bl, bu):
    dim = win.shape[0]
    J = np.zeros((dim, dim))
    for r in range(dim):
        for k in range(bl + bu + 1):
            c = r - bu + k
            if 0 <= c < dim:
                J[r, c] = win[r, k]
    return J


def _fd_jacobian(g, t, y):
    dim = len(y)
    J = np.empty((dim, dim))
    eps = 1e-6
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = eps
        J[:, c] = (g(t, y + e) - g(t, y - e)) / (2 * eps)
    return J


def test_reaction_diffusion_gridpoint_window_exact():
    # the reaction terms are at most bilinear, so central differences are
    # exact and the declared 7-diagonal window must reproduce them fully
    d = 5
    p = reaction_diffusion(d=d, ordering="by-gridpoint")
    y = np.random.default_rng(9).uniform(0.1, 0.8, 3 * d)
    J_fd = _fd_jacobian(p.g_all, 0.7, y)
    J_win = _window_to_dense(p.dg_all(0.7, y), 3, 3)
    np.testing.assert_allclose(J_win, J_fd, rtol=1e-7, atol=1e-6)


def test_reaction_diffusion_species_window_truncates():
    # by-species keeps only the within-species tridiagonal: it must match
    # the true Jacobian on that band and drop genuine cross-species terms
    d = 5
    p = reaction_diffusion(d=d, ordering="by-species")
    y = np.random.default_rng(10).uniform(0.1, 0.8, 3 * d)
    J_fd = _fd_jacobian(p.g_all, 0.7, y)
    J_win = _window_to_dense(p.dg_all(0.7, y), 1, 1)
    mask = np.zeros((3 * d, 3 * d), dtype=bool)
    for r in range(3 * d):
        for c in (r - 1, r, r + 1):
            if 0 <= c < 3 * d:
                mask[r, c] = True
    np.testing.assert_allclose(J_win[mask], J_fd[mask], rtol=1e-7, atol=1e-6)
    dropped = np.abs(J_fd[~mask]).max()
    assert dropped > 0.1  # the approximation is genuinely lossy


def test_reaction_diffusion_validation_and_reference():
    with pytest.raises(ValueError, match="alpha must lie in"):
        reaction_diffusion(alpha=1.2)
    with pytest.raises(ValueError, match="at least two grid points"):
        reaction_diffusion(d=1)
    with pytest.raises(ValueError, match="unknown ordering"):
        reaction_diffusion(ordering="rowwise")
    p = reaction_diffusion(d=4)
    np.testing.assert_array_equal(p.mass_diag, np.zeros(12))
    check_initial_consistency(p)
    ref = REACTION_DIFFUSION_REFERENCE
    assert set(ref) == {"conditions", "by-species", "by-gridpoint"}
    for key in ("by-species", "by-gridpoint"):
        assert set(ref[key]) == {"nstep", "nfcn", "njac"}
