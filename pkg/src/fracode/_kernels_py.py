"""Pure-numpy implementations of the hot block-arithmetic kernels.

Mirror of the compiled module _kernels; selected by _backend when the
extension is unavailable or FRACODE_PURE=1.  All functions operate on the
flattened auxiliary-state layout: blocks in term order, within a block the
chain states grouped per exponential (chain position varies fastest).

Shared array vocabulary:
  gamma_rep : (D,) decay rate at each auxiliary position
  sub       : (D,) chain coefficient; position p adds sub[p]*state[p-1],
              zero at every chain head so a global shift is safe
  wtilde    : (D,) output weights, nonzero only at chain tails
  k1_pos    : indices of chain heads (where the integrand enters)
  term_of_k1: term index feeding each chain head
  offsets   : (n_terms+1,) block boundaries within the auxiliary region
  lev_idx   : tuple of index arrays, positions with sub == level, used to
              vectorize the short forward recurrences level by level
"""

import numpy as np


def block_rhs(z, gamma_rep, sub, k1_pos, term_of_k1, gvals, out):
    """out = -gamma*z + sub*shift(z) + G at chain heads; batched over rows."""
    np.multiply(z, gamma_rep, out=out)
    np.negative(out, out=out)
    if z.shape[-1] > 1:
        out[..., 1:] += sub[1:] * z[..., :-1]
    if k1_pos.size:
        out[..., k1_pos] += gvals[..., term_of_k1]
    return out


def block_integrals(z, wtilde, offsets, out):
    """Per-term weighted sums over the auxiliary states, batched over rows."""
    if offsets.size <= 1:
        return out
    np.add.reduceat(z * wtilde, offsets[:-1], axis=-1, out=out)
    return out


def block_solve(a, inv_sg, sub, lev_idx, out):
    """Forward-substitute (s*I - J_blocks)^{-1} a into out.

    J_blocks is block lower-bidiagonal with diagonal -gamma and subdiagonal
    sub; inv_sg holds 1/(s + gamma) in the solve's scalar field.
    """
    np.multiply(a, inv_sg, out=out)
    for lev, idx in enumerate(lev_idx, start=1):
        out[idx] = (a[idx] + lev * out[idx - 1]) * inv_sg[idx]
    return out


def segment_dot(wtilde, v, offsets, out):
    """Per-term dot products wtilde . v over block segments."""
    if offsets.size <= 1:
        return out
    np.add.reduceat(wtilde * v, offsets[:-1], out=out)
    return out


def schur_reduce(a, inv_sg, sub, wtilde, offsets, lev_idx, v_out, q_out):
    """Tail forward substitution and the per-term reductions in one pass."""
    block_solve(a, inv_sg, sub, lev_idx, v_out)
    return segment_dot(wtilde, v_out, offsets, q_out)


def schur_expand(a, inv_sg, sub, k1_pos, term_of_k1, g, lev_idx, w_scratch, out):
    """Back substitution for the tail unknowns, g fed in at chain heads."""
    add_at_heads(a, k1_pos, term_of_k1, g, w_scratch)
    return block_solve(w_scratch, inv_sg, sub, lev_idx, out)


def newton_rhs(mass, W, gstg, fac1, sre, sim, rhs_r, rhs_c):
    """Right-hand sides of the two transformed Newton systems.

    rhs_r = gstg[0] - fac1*mass*W[0] and rhs_c = (gstg[1] + i gstg[2])
    - (sre + i sim)*mass*(W[1] + i W[2]).
    """
    mw = mass * W
    np.multiply(mw[0], fac1, out=rhs_r)
    np.subtract(gstg[0], rhs_r, out=rhs_r)
    rhs_c.real = gstg[1] - sre * mw[1] + sim * mw[2]
    rhs_c.imag = gstg[2] - sre * mw[2] - sim * mw[1]
    return rhs_r, rhs_c


def scaled_sqnorm3(dw1, dwc, scal):
    """Sum of the three scaled squared increment norms."""
    u = dw1 / scal
    v = dwc / scal
    return float(u @ u + v.real @ v.real + v.imag @ v.imag)


def accumulate_w(W, dw1, dwc):
    """W[0] += dw1, W[1] += Re dwc, W[2] += Im dwc."""
    W[0] += dw1
    W[1] += dwc.real
    W[2] += dwc.imag


def error_rhs(Z, dd1, dd2, dd3, h, mass, f0, out):
    """out = f0 + mass * (dd1*Z[0] + dd2*Z[1] + dd3*Z[2]) / h."""
    np.multiply(Z[0], dd1, out=out)
    out += dd2 * Z[1]
    out += dd3 * Z[2]
    out *= mass / h
    out += f0
    return out


def extrapolate_collocation(cont, s1, s2, s3, c2m1, c1m1, Z):
    """Z[i] = s_i*(cont[1] + (s_i - c2m1)*(cont[2] + (s_i - c1m1)*cont[3]))."""
    for i, s in enumerate((s1, s2, s3)):
        Z[i] = s * (cont[1] + (s - c2m1) * (cont[2] + (s - c1m1) * cont[3]))
    return Z


def add_at_heads(a, k1_pos, term_of_k1, g, out):
    """out = a with g[term] added at each chain-head position."""
    np.copyto(out, a)
    if k1_pos.size:
        out[k1_pos] += g[term_of_k1]
    return out
