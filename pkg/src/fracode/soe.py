"""Exponential-sum compression of the power-law memory kernel.

The kernel t**(alpha-1)/Gamma(alpha), 0 < alpha < 1, is approximated on a
time window [delta, t_end] by

    k(t) ~= sum_i c_i * exp(-gamma_i * t),

with weights and exponents obtained from a trapezoidal discretization of
the kernel's integral representation on a tilted contour.  The number of
terms grows like log(t_end/delta) * log(1/eps), and the relative error is
certified to stay below 3*eps on the whole window.

The lower validity bound delta is tied to eps and alpha so that everything
the solver ever evaluates below delta contributes less than eps to the
convolution; callers never need kernel values at t < delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, gamma as gamma_fn

__all__ = [
    "KernelParams",
    "SumOfExponentials",
    "choose_parameters",
    "build_soe",
    "eval_soe",
    "verify_soe",
    "perturbation_bound_half",
    "write_soe",
    "read_soe",
]


@dataclass(frozen=True)
class KernelParams:
    """Discretization parameters for one kernel approximation.

    Attributes
    ----------
    alpha : float
        Kernel exponent, in (0, 1).
    eps : float
        Requested relative accuracy of the approximation.
    t_end : float
        Right end of the validity window.
    delta : float
        Left end of the validity window, (Gamma(alpha+1)*eps)**(1/alpha).
    h : float
        Trapezoidal step of the underlying quadrature.
    m_lo : int
        Lowest quadrature index (negative except for very loose eps).
    n_hi : int
        One past the highest quadrature index; the sum has n_hi - m_lo terms.
    """

    alpha: float
    eps: float
    t_end: float
    delta: float
    h: float
    m_lo: int
    n_hi: int

    @property
    def n_terms(self) -> int:
        return self.n_hi - self.m_lo


@dataclass(frozen=True)
class SumOfExponentials:
    """A certified exponential-sum kernel approximation.

    Attributes
    ----------
    alpha : float
        Kernel exponent.
    weights, exponents : ndarray
        Positive coefficients c_i and rates gamma_i, exponents strictly
        increasing.
    valid_from, valid_to : float
        Window on which the relative-error certificate holds.
    eps : float
        Certified accuracy level; the relative error on the window is
        bounded by 3*eps.
    """

    alpha: float
    weights: np.ndarray
    exponents: np.ndarray
    valid_from: float
    valid_to: float
    eps: float

    @property
    def n_terms(self) -> int:
        return len(self.weights)


def choose_parameters(alpha: float, eps: float, t_end: float) -> KernelParams:
    """Pick the trapezoidal step and index range for given accuracy.

    Parameters
    ----------
    alpha : float
        Kernel exponent, must lie strictly inside (0, 1).
    eps : float
        Requested relative accuracy, in (0, 1); additionally
        Gamma(1-alpha)*eps must stay below 1 or the truncation bound
        degenerates.
    t_end : float
        Final time; must exceed the induced lower bound delta.

    Returns
    -------
    KernelParams

    Notes
    -----
    The step h balances the discretization error of the trapezoidal rule
    (controlled through the contour tilt a) against the number of nodes.
    The index range [m_lo, n_hi) keeps both truncation tails below eps:
    the lower cutoff x_* handles the smooth end (large t), the upper
    cutoff the singular end (t near delta).  The first dropped node at
    position x contributes h*exp((1-alpha)x - delta*e^x) against a kernel
    value delta^(alpha-1)/Gamma(alpha), so with z = delta*e^x the cutoff
    must satisfy h * z^(1-alpha) * exp(-z) <= Gamma(1-alpha) * eps; the
    algebraic prefactor is what pushes z beyond -log(Gamma(1-alpha)*eps).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    x_hi = -math.log(gamma_fn(1.0 - alpha) * eps)
    if x_hi <= 0.0:
        raise ValueError(
            f"eps={eps} too large for alpha={alpha}: "
            "Gamma(1-alpha)*eps must be below 1"
        )
    # cutoffs carry exponents 1/alpha and 1/(1-alpha), so the plain powers
    # underflow near the ends of (0, 1); all placement runs on logarithms
    log_delta = math.log(gamma_fn(alpha + 1.0) * eps) / alpha
    delta = (gamma_fn(alpha + 1.0) * eps) ** (1.0 / alpha)
    if delta <= 0.0:
        raise ValueError(
            f"window start underflows for alpha={alpha}, eps={eps}; "
            "loosen eps or move alpha away from zero"
        )
    if t_end <= delta:
        raise ValueError(
            f"t_end={t_end} must exceed delta={delta:.3e}; "
            "tighten eps or enlarge the window"
        )

    log_inv_eps = math.log(1.0 / eps)
    a = 0.5 * math.pi * (1.0 - (1.0 - alpha) / ((2.0 - alpha) * log_inv_eps))
    a = min(max(a, 1e-8), 0.5 * math.pi - 1e-8)
    h = 2.0 * math.pi * a / math.log1p((2.0 / eps) * math.cos(a) ** (alpha - 1.0))

    log_x_lo = math.log(gamma_fn(2.0 - alpha) * eps) / (1.0 - alpha)
    m_lo = math.floor((log_x_lo - math.log(t_end)) / h)
    # z - (1-alpha)*log(z) = log(h / (Gamma(1-alpha)*eps)), by fixed point;
    # never shallower than the plain exponential cutoff x_hi
    b = x_hi + math.log(h)
    z_cut = max(b, 1.0)
    for _ in range(3):
        z_cut = b + (1.0 - alpha) * math.log(max(z_cut, 1.0))
    z_cut = max(z_cut, x_hi)
    n_hi = math.ceil((math.log(z_cut) - log_delta) / h)
    # largest rate is exp((n_hi-1)*h); past ~exp(700) the construction
    # leaves double range and the evaluated sum turns into inf*0 noise
    if (n_hi - 1) * h > 700.0:
        raise ValueError(
            f"kernel rates overflow double precision for alpha={alpha}, "
            f"eps={eps}: the window [{delta:.3e}, {t_end:g}] spans too many "
            "scales; loosen eps or increase alpha"
        )
    return KernelParams(
        alpha=alpha, eps=eps, t_end=t_end, delta=delta, h=h, m_lo=m_lo, n_hi=n_hi
    )


def build_soe(params: KernelParams) -> SumOfExponentials:
    """Materialize weights and exponents for the given parameters.

    Node i of the trapezoidal rule contributes the weight
    h*sin(pi*alpha)/pi * exp((1-alpha)*i*h) and the rate exp(i*h),
    for i = m_lo .. n_hi-1.
    """
    i = np.arange(params.m_lo, params.n_hi, dtype=float)
    scale = params.h * math.sin(math.pi * params.alpha) / math.pi
    weights = scale * np.exp((1.0 - params.alpha) * i * params.h)
    exponents = np.exp(i * params.h)
    return SumOfExponentials(
        alpha=params.alpha,
        weights=weights,
        exponents=exponents,
        valid_from=params.delta,
        valid_to=params.t_end,
        eps=params.eps,
    )


def eval_soe(soe: SumOfExponentials, t):
    """Evaluate the exponential sum at scalar or array t > 0.

    Individual terms may underflow to zero far beyond the window; that is
    harmless.  The certificate only applies inside [valid_from, valid_to].
    """
    t_arr = np.asarray(t, dtype=float)
    with np.errstate(under="ignore"):
        vals = np.exp(-np.multiply.outer(t_arr, soe.exponents)) @ soe.weights
    return vals if t_arr.ndim else float(vals)


def kernel_exact(alpha: float, t):
    """The target kernel t**(alpha-1)/Gamma(alpha)."""
    t_arr = np.asarray(t, dtype=float)
    vals = t_arr ** (alpha - 1.0) / gamma_fn(alpha)
    return vals if t_arr.ndim else float(vals)


def verify_soe(soe: SumOfExponentials, n_samples: int) -> float:
    """Max relative kernel error over a log-uniform sample of the window.

    Samples n_samples points geometrically spaced on
    [valid_from, valid_to] (endpoints included) and returns
    max |k(t) - soe(t)| / k(t).  The construction guarantees the result
    stays below 3*eps.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    t = np.geomspace(soe.valid_from, soe.valid_to, n_samples)
    exact = kernel_exact(soe.alpha, t)
    approx = eval_soe(soe, t)
    return float(np.max(np.abs(exact - approx) / exact))


def perturbation_bound_half(l_f: float, m_f: float, t):
    """Growth envelope for kernel perturbations at alpha = 1/2.

    Solves the scalar comparison equation

        u(t) = m_f*(1 + sqrt(t))
               + (l_f/sqrt(pi)) * integral_0^t u(s)/sqrt(t-s) ds

    in closed form:

        u(t) = m_f/(2 l_f) * (-sqrt(pi)
               + (2 l_f + sqrt(pi)) * exp(l_f^2 t) * (1 + erf(l_f sqrt(t))))

    which satisfies u(0) = m_f and grows like exp(l_f^2 t).  l_f plays the
    role of a Lipschitz constant of the right-hand side and m_f bounds the
    inhomogeneity.
    """
    if l_f <= 0.0:
        raise ValueError(f"l_f must be positive, got {l_f}")
    if m_f <= 0.0:
        raise ValueError(f"m_f must be positive, got {m_f}")
    t_arr = np.asarray(t, dtype=float)
    sqpi = math.sqrt(math.pi)
    vals = (m_f / (2.0 * l_f)) * (
        -sqpi
        + (2.0 * l_f + sqpi) * np.exp(l_f**2 * t_arr) * (1.0 + erf(l_f * np.sqrt(t_arr)))
    )
    return vals if t_arr.ndim else float(vals)


def write_soe(soe: SumOfExponentials, params: KernelParams, fh) -> None:
    """Write the coefficient table in the plain-text exchange format.

    One header line '# alpha eps T delta h M N' carrying the values,
    then one 'index c_i gamma_i' line per term, 17 significant digits.
    """
    if isinstance(fh, (str, bytes)):
        with open(fh, "w") as f:
            write_soe(soe, params, f)
        return
    fh.write(
        "# {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {} {}\n".format(
            params.alpha,
            params.eps,
            params.t_end,
            params.delta,
            params.h,
            params.m_lo,
            params.n_hi,
        )
    )
    for idx, (c, g) in enumerate(zip(soe.weights, soe.exponents), start=params.m_lo):
        fh.write(f"{idx} {c:.17g} {g:.17g}\n")


def read_soe(fh) -> tuple[SumOfExponentials, KernelParams]:
    """Parse a file produced by write_soe."""
    if isinstance(fh, (str, bytes)):
        with open(fh) as f:
            return read_soe(f)
    header = fh.readline().split()
    if not header or header[0] != "#" or len(header) != 8:
        raise ValueError("missing or malformed coefficient-file header")
    alpha, eps, t_end, delta, h = map(float, header[1:6])
    m_lo, n_hi = int(header[6]), int(header[7])
    params = KernelParams(
        alpha=alpha, eps=eps, t_end=t_end, delta=delta, h=h, m_lo=m_lo, n_hi=n_hi
    )
    idx = []
    weights = []
    exponents = []
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        idx.append(int(parts[0]))
        weights.append(float(parts[1]))
        exponents.append(float(parts[2]))
    if idx != list(range(m_lo, n_hi)):
        raise ValueError("coefficient lines do not match the header index range")
    soe = SumOfExponentials(
        alpha=alpha,
        weights=np.asarray(weights),
        exponents=np.asarray(exponents),
        valid_from=delta,
        valid_to=t_end,
        eps=eps,
    )
    return soe, params
