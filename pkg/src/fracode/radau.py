"""Adaptive 3-stage Radau IIA integrator for M y' = F(t, y), M diagonal.

Order 5, L-stable, stiffly accurate; singular mass rows make the problem
an index-1 DAE.  Each step solves the collocation equations at the Radau
nodes c = ((4-sqrt6)/10, (4+sqrt6)/10, 1) by simplified Newton with a
frozen Jacobian.  Transforming the stages with the eigenvector matrix of
the inverse Runge-Kutta matrix decouples every iteration into one real
system with shift gamma_hat/h and one complex system with shift
(alpha + i*beta)/h, both of the form (s*M - J)u = a and delegated to a
pluggable linear solver.

The error estimate is the standard embedded order-3 companion; the step
controller combines the classical err^(-1/4) rule with Gustafsson's
predictive factor.  Step size and Jacobian handling (reuse while the
Newton contraction rate stays small and the step ratio stays inside
[quot1, quot2], halving on divergence, rejection bookkeeping) follow the
classical design throughout, so statistics are comparable with published
stiff-solver tables.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.linalg import LinAlgError

from . import _backend
from .augment import AugmentedSystem, jacobian, rhs, rhs_stages
from .problem import check_initial_consistency

__all__ = ["IntegratorConfig", "SolveReport", "integrate", "initial_step"]

# Radau IIA nodes and embedded-estimator weights
SQ6 = math.sqrt(6.0)
C1 = (4.0 - SQ6) / 10.0
C2 = (4.0 + SQ6) / 10.0
C1M1 = C1 - 1.0
C2M1 = C2 - 1.0
C1MC2 = C1 - C2
DD1 = -(13.0 + 7.0 * SQ6) / 3.0
DD2 = (-13.0 + 7.0 * SQ6) / 3.0
DD3 = -1.0 / 3.0

# eigenvalue data of the inverse Runge-Kutta matrix: one real eigenvalue
# gamma_hat and a complex pair alphn +/- i*betan
_CR81 = 81.0 ** (1.0 / 3.0)
_CR9 = 9.0 ** (1.0 / 3.0)
U1 = (6.0 + _CR81 - _CR9) / 30.0
GAMMA_HAT = 1.0 / U1
_ALPH = (12.0 - _CR81 + _CR9) / 60.0
_BETA = (_CR81 + _CR9) * math.sqrt(3.0) / 60.0
_CNO = _ALPH * _ALPH + _BETA * _BETA
ALPHN = _ALPH / _CNO
BETAN = _BETA / _CNO

# stage transformation: T diagonalizes the inverse RK matrix over the
# reals (TI @ inv(A) @ T = block diag(gamma_hat, [[alphn,-betan],[betan,alphn]]))
T_MAT = np.array(
    [
        [9.1232394870892942792e-02, -0.14125529502095420843, -3.0029194105147424492e-02],
        [0.24171793270710701896, 0.20412935229379993199, 0.38294211275726193779],
        [0.96604818261509293619, 1.0, 0.0],
    ]
)
TI_MAT = np.array(
    [
        [4.3255798900631553510, 0.33919925181580986954, 0.54177053993587487119],
        [-4.1787185915519047273, -0.32768282076106238708, 0.47662355450055045196],
        [-0.50287263494578687595, 2.5719269498556054292, -0.59603920482822492497],
    ]
)

UROUND = float(np.finfo(float).eps)

STATUS_SUCCESS = "success"
STATUS_MAX_STEPS = "max-steps"
STATUS_NEWTON = "newton-failure"
STATUS_UNDERFLOW = "step-underflow"


@dataclass
class IntegratorConfig:
    """Knobs of the step-size controller and Newton iteration.

    The defaults are the classical ones; they are what every benchmark in
    this package runs with.  rtol/atol may be scalars or per-component
    arrays over the augmented state.  h_fixed disables error control and
    marches with a constant step (convergence studies).
    """

    rtol: float = 1e-6
    atol: float = 1e-6
    h_init: Optional[float] = None
    h_max: Optional[float] = None
    max_steps: int = 10**6
    newton_max_iter: int = 7
    newton_tol_factor: float = 0.03
    jacobian_reuse: bool = True
    safety: float = 0.9
    fac_min: float = 0.2  # hnew >= fac_min * h
    fac_max: float = 8.0  # hnew <= fac_max * h
    quot1: float = 1.0  # keep h and factorization while hnew/h in [quot1, quot2]
    quot2: float = 1.2
    thet: float = 0.001  # Jacobian reuse threshold on the contraction rate
    h_fixed: Optional[float] = None
    consistency_tol: float = 1e-8

    def __post_init__(self):
        if np.any(np.asarray(self.rtol) <= 0.0) or np.any(np.asarray(self.atol) <= 0.0):
            raise ValueError("rtol and atol must be positive")
        if not self.fac_min < 1.0 < self.fac_max:
            raise ValueError("need fac_min < 1 < fac_max")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class SolveReport:
    """Outcome of one integration.

    t_samples/y_samples hold the requested output points and the full
    augmented states there (head variables first).  Counters: nstep step
    attempts, naccpt accepted, nrejct rejected after the first acceptance,
    nfcn right-hand-side evaluations, njac Jacobian evaluations, ndec
    factorization pairs, nsol linear solves.
    """

    t_samples: np.ndarray
    y_samples: np.ndarray
    nstep: int = 0
    naccpt: int = 0
    nrejct: int = 0
    nfcn: int = 0
    njac: int = 0
    ndec: int = 0
    nsol: int = 0
    wall_time: float = 0.0
    status: str = STATUS_SUCCESS
    message: str = ""


def _tolerance_vectors(cfg: IntegratorConfig, n: int):
    """Internal tolerance transform: the controller targets order 3 locally."""
    rtol = np.broadcast_to(np.asarray(cfg.rtol, dtype=float), (n,))
    atol = np.broadcast_to(np.asarray(cfg.atol, dtype=float), (n,))
    quott = atol / rtol
    rtol1 = 0.1 * rtol ** (2.0 / 3.0)
    atol1 = rtol1 * quott
    return rtol1, atol1


def initial_step(sys: AugmentedSystem, cfg: IntegratorConfig) -> float:
    """Heuristic first step from the scaled size of the initial derivative."""
    f0 = rhs(sys, sys.base.t_span[0], sys.y0)
    return _initial_step_from(sys, cfg, f0)


def _initial_step_from(sys: AugmentedSystem, cfg: IntegratorConfig, f0: np.ndarray) -> float:
    t0, t_end = sys.base.t_span
    span = t_end - t0
    h_max = cfg.h_max if cfg.h_max is not None else span
    scal = np.asarray(cfg.atol, dtype=float) + np.asarray(cfg.rtol, dtype=float) * np.abs(sys.y0)
    d0 = math.sqrt(float(np.mean((sys.y0 / scal) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scal) ** 2)))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6 * span
    else:
        h0 = 0.01 * d0 / d1
    return min(h0, h_max, span)


def _rms(v: np.ndarray, scal: np.ndarray) -> float:
    w = v / scal
    return math.sqrt(float(w @ w) / w.size)


def integrate(
    sys: AugmentedSystem,
    cfg: IntegratorConfig,
    solver,
    output_points: Sequence[float],
) -> SolveReport:
    """Integrate the augmented system over its t_span.

    solver is a structured linear solver instance (prepare/factorize/
    solve protocol); output_points must be increasing and lie within the
    problem's time interval.  States at output points are produced by the
    collocation dense output of the step containing each point.
    """
    t_start = time.perf_counter()
    t0, t_end = map(float, sys.base.t_span)
    if not t_end > t0:
        raise ValueError(f"need t_end > t0, got span ({t0}, {t_end})")
    pts = np.asarray(output_points, dtype=float)
    if pts.ndim != 1 or pts.size == 0:
        raise ValueError("output_points must be a non-empty 1-D sequence")
    if np.any(np.diff(pts) <= 0.0):
        raise ValueError("output_points must be strictly increasing")
    if pts[0] < t0 - 4 * UROUND * max(1.0, abs(t0)) or pts[-1] > t_end * (1 + 4 * UROUND) + 4 * UROUND:
        raise ValueError("output_points must lie within the problem's t_span")
    check_initial_consistency(sys.base, cfg.consistency_tol)

    n = sys.total_dim
    mass = sys.mass
    y = sys.y0.astype(float).copy()
    t = t0
    rtol1, atol1 = _tolerance_vectors(cfg, n)
    rtol1_min = float(np.min(rtol1))
    fnewt = max(10.0 * UROUND / rtol1_min, min(cfg.newton_tol_factor, math.sqrt(rtol1_min)))
    nit = cfg.newton_max_iter
    cfac = cfg.safety * (1 + 2 * nit)
    facl = 1.0 / cfg.fac_min
    facr = 1.0 / cfg.fac_max
    thet = cfg.thet if cfg.jacobian_reuse else -1.0
    fixed = cfg.h_fixed is not None
    h_max = min(cfg.h_max if cfg.h_max is not None else t_end - t0, t_end - t0)

    report = SolveReport(
        t_samples=pts, y_samples=np.empty((pts.size, n)), status=STATUS_SUCCESS
    )
    iout = 0

    def fuzz(x):
        return 4.0 * UROUND * max(1.0, abs(x))

    # points at the start are served by the initial data directly
    while iout < pts.size and pts[iout] <= t0 + fuzz(t0):
        report.y_samples[iout] = y
        iout += 1

    f0 = rhs(sys, t, y)
    report.nfcn += 1
    if fixed:
        h = min(float(cfg.h_fixed), t_end - t0)
    elif cfg.h_init is not None:
        h = min(abs(float(cfg.h_init)), h_max)
    else:
        h = min(_initial_step_from(sys, cfg, f0), h_max)
    h = max(h, 10.0 * UROUND)

    scal = np.empty(n)
    np.abs(y, out=scal)
    np.multiply(scal, rtol1, out=scal)
    np.add(scal, atol1, out=scal)
    faccon = 1.0
    theta = 0.0
    hold = h
    hacc = h
    erracc = 1e-2
    first = True
    reject = False
    caljac = False
    need_jac = True
    need_fact = True
    nsing = 0
    last = t + h * 1.0001 >= t_end
    if last:
        h = t_end - t

    fac1 = 0.0
    sre = sim = 0.0
    f_real = f_cplx = None
    cont = np.zeros((4, n))  # dense output: value at t_new plus 3 polynomial coeffs
    Z = np.zeros((3, n))
    W = np.zeros((3, n))
    stages = np.empty((3, n))
    fstg = np.empty((3, n))
    gstg = np.empty((3, n))
    # Newton scratch; the inner iteration runs allocation-free
    rhs_r = np.empty(n)
    rhs_c = np.empty(n, dtype=complex)

    def finish(status, message=""):
        report.status = status
        report.message = message
        report.wall_time = time.perf_counter() - t_start
        if iout < pts.size:
            report.y_samples[iout:] = np.nan
        return report

    while True:
        if need_jac:
            J = jacobian(sys, t, y)
            solver.prepare(J, mass)
            report.njac += 1
            caljac = True
            need_jac = False
            need_fact = True
        if need_fact:
            fac1 = GAMMA_HAT / h
            sre = ALPHN / h
            sim = BETAN / h
            try:
                f_real = solver.factorize(fac1)
                f_cplx = solver.factorize(complex(sre, sim))
            except LinAlgError as exc:
                nsing += 1
                if nsing >= 5:
                    return finish(STATUS_NEWTON, f"matrix is repeatedly singular: {exc}")
                h *= 0.5
                reject = True
                last = False
                continue
            report.ndec += 1
            need_fact = False

        report.nstep += 1
        if report.nstep > cfg.max_steps:
            return finish(STATUS_MAX_STEPS, f"more than {cfg.max_steps} steps needed")
        if 0.1 * h <= abs(t) * UROUND:
            return finish(STATUS_UNDERFLOW, f"step size h={h:.3e} underflows at t={t:.6e}")

        t_new = t + h
        # stage start values: zero on the very first step, otherwise
        # extrapolate the previous collocation polynomial
        if first:
            Z[:] = 0.0
            W[:] = 0.0
        else:
            hr = h / hold
            _backend.extrapolate_collocation(
                cont, C1 * hr, C2 * hr, hr, C2M1, C1M1, Z
            )
            np.matmul(TI_MAT, Z, out=W)

        # simplified Newton on the transformed stage increments
        newt = 0
        faccon = max(faccon, UROUND) ** 0.8
        theta = abs(thet)
        dynold = 0.0
        thqold = 0.0
        converged = False
        bad_step = False
        while True:
            if newt >= nit:
                break
            np.add(y, Z, out=stages)
            rhs_stages(sys, (t + C1 * h, t + C2 * h, t_new), stages, fstg)
            report.nfcn += 3
            np.matmul(TI_MAT, fstg, out=gstg)
            _backend.newton_rhs(mass, W, gstg, fac1, sre, sim, rhs_r, rhs_c)
            dw1 = f_real.solve(rhs_r)
            dwc = f_cplx.solve(rhs_c)
            report.nsol += 2
            newt += 1
            dyno = math.sqrt(_backend.scaled_sqnorm3(dw1, dwc, scal) / (3 * n))
            if newt > 1 and newt < nit:
                thq = dyno / dynold
                if newt == 2:
                    theta = thq
                else:
                    theta = math.sqrt(thq * thqold)
                thqold = thq
                if theta < 0.99:
                    faccon = theta / (1.0 - theta)
                    dyth = faccon * dyno * theta ** (nit - 1 - newt) / fnewt
                    if dyth >= 1.0:
                        # convergence too slow to make the tolerance
                        # within the remaining iterations
                        qnewt = max(1e-4, min(20.0, dyth))
                        h *= 0.8 * qnewt ** (-1.0 / (4 + nit - 1 - newt))
                        bad_step = True
                        break
                else:
                    break  # diverging
            dynold = max(dyno, UROUND)
            _backend.accumulate_w(W, dw1, dwc)
            np.matmul(T_MAT, W, out=Z)
            if faccon * dyno <= fnewt:
                converged = True
                break

        if not converged:
            if not bad_step:
                h *= 0.5
            reject = True
            last = False
            if fixed:
                return finish(
                    STATUS_NEWTON,
                    f"Newton iteration failed at t={t:.6e} with fixed step {cfg.h_fixed}",
                )
            if 0.1 * h <= abs(t) * UROUND:
                return finish(STATUS_UNDERFLOW, f"step size underflows at t={t:.6e}")
            if caljac:
                need_fact = True
            else:
                need_jac = True
            continue

        # embedded order-3 error estimate
        if fixed:
            err = 0.0
        else:
            # rhs_r is free between Newton sweeps and carries the estimator rhs
            _backend.error_rhs(Z, DD1, DD2, DD3, h, mass, f0, rhs_r)
            verr = f_real.solve(rhs_r)
            report.nsol += 1
            err = max(_rms(verr, scal), 1e-10)
            if err >= 1.0 and (first or reject):
                fpert = rhs(sys, t, y + verr)
                report.nfcn += 1
                _backend.error_rhs(Z, DD1, DD2, DD3, h, mass, fpert, rhs_r)
                verr = f_real.solve(rhs_r)
                report.nsol += 1
                err = max(_rms(verr, scal), 1e-10)

        if fixed:
            hnew = h
        else:
            fac = min(cfg.safety, cfac / (newt + 2 * nit))
            quot = max(facr, min(facl, err**0.25 / fac))
            hnew = h / quot

        if err < 1.0:
            # accept
            report.naccpt += 1
            if not fixed:
                if report.naccpt > 1:
                    # Gustafsson's predictive factor
                    facgus = (hacc / h) * (err**2 / erracc) ** 0.25 / cfg.safety
                    facgus = max(facr, min(facl, facgus))
                    quot = max(quot, facgus)
                    hnew = h / quot
                hacc = h
                erracc = max(1e-2, err)
            hold = h
            y += Z[2]
            t = t_new
            # collocation polynomial for dense output and warm starts
            cont[0] = y
            cont[1] = (Z[1] - Z[2]) / C2M1
            ak = (Z[0] - Z[1]) / C1MC2
            acont3 = (ak - Z[0] / C1) / C2
            cont[2] = (ak - cont[1]) / C1M1
            cont[3] = cont[2] - acont3
            while iout < pts.size and (
                last or pts[iout] <= t + fuzz(t)
            ):
                s = (pts[iout] - t) / hold
                report.y_samples[iout] = cont[0] + s * (
                    cont[1] + (s - C2M1) * (cont[2] + (s - C1M1) * cont[3])
                )
                iout += 1
            np.abs(y, out=scal)
            np.multiply(scal, rtol1, out=scal)
            np.add(scal, atol1, out=scal)
            first = False
            caljac = False
            if last or iout >= pts.size:
                return finish(STATUS_SUCCESS)
            f0 = rhs(sys, t, y)
            report.nfcn += 1
            hnew = min(hnew, h_max, t_end - t)
            if reject:
                hnew = min(hnew, h)
            reject = False
            if fixed:
                # the final step absorbs accumulated rounding in t
                rem = t_end - t
                if rem <= float(cfg.h_fixed) * 1.0001:
                    h = rem
                    last = True
                else:
                    h = float(cfg.h_fixed)
                need_fact = abs(h - hold) > 1e-14 * hold
                if theta > thet:
                    need_jac = True
                continue
            if t + hnew / cfg.quot1 >= t_end:
                h = t_end - t
                last = True
                need_fact = True
                if theta > thet:
                    need_jac = True
            else:
                qt = hnew / h
                if theta <= thet and cfg.quot1 <= qt <= cfg.quot2:
                    pass  # keep h, Jacobian and factorization
                else:
                    h = hnew
                    need_fact = True
                    if theta > thet:
                        need_jac = True
            continue

        # reject
        reject = True
        last = False
        if first:
            h *= 0.1
        else:
            h = hnew
        if report.naccpt >= 1:
            report.nrejct += 1
        if caljac:
            need_fact = True
        else:
            need_jac = True
