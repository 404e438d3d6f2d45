"""Pure numpy accumulation kernels.

The loops run over terms (group elements) in ascending order and are
vectorized over points.  Every complex operation is spelled out on separate
real and imaginary arrays so the rounding sequence per (point, term) is the
same as in the compiled kernels, which makes the two backends agree bitwise.
"""
import numpy as np

NAME = "python"


def set_num_threads(n):
    """No-op: the numpy kernels are single threaded."""
    return 1


def _cpow(zr, zi, j):
    # binary powering; the base is not squared after the top bit
    if j < 0:
        zi = -zi
        j = -j
    rr = np.ones_like(zr)
    ri = np.zeros_like(zr)
    while j:
        if j & 1:
            rr, ri = rr * zr - ri * zi, rr * zi + ri * zr
        j >>= 1
        if j:
            zr, zi = zr * zr - zi * zi, zr * zi + zi * zr
    return rr, ri


def _add_term(t, vr, vi, tcr, tci, xir, xii, exps, use_coef, use_xi, S):
    Sr, Si, Cr, Ci = S
    if use_coef:
        cr, ci = tcr[t], tci[t]
        if use_xi:
            pr, pi = _cpow(xir, xii, int(exps[t]))
            cr, ci = cr * pr - ci * pi, cr * pi + ci * pr
        tr = cr * vr - ci * vi
        ti = cr * vi + ci * vr
    else:
        tr, ti = vr, vi
    # Kahan update, real and imaginary parts independently
    y = tr - Cr
    s = Sr + y
    Cr[:] = (s - Sr) - y
    Sr[:] = s
    y = ti - Ci
    s = Si + y
    Ci[:] = (s - Si) - y
    Si[:] = s


def char_accumulate(ar, ai, psr, psi, tcr, tci, xir, xii, exps, use_coef, use_xi,
                    Sr, Si, Cr, Ci):
    """Accumulate ``sum_t coef_t * sum_q a_iq * ps_tq`` into Kahan state."""
    m, N = psr.shape
    S = (Sr, Si, Cr, Ci)
    for t in range(m):
        vr = np.zeros(ar.shape[0])
        vi = np.zeros(ar.shape[0])
        for q in range(N):
            br = ar[:, q] * psr[t, q] - ai[:, q] * psi[t, q]
            bi = ar[:, q] * psi[t, q] + ai[:, q] * psr[t, q]
            vr = vr + br
            vi = vi + bi
        _add_term(t, vr, vi, tcr, tci, xir, xii, exps, use_coef, use_xi, S)


def value_accumulate(Vr, Vi, tcr, tci, xir, xii, exps, use_coef, use_xi, Sr, Si, Cr, Ci):
    """Accumulate ``sum_t coef_t * V_it`` into Kahan state."""
    S = (Sr, Si, Cr, Ci)
    for t in range(Vr.shape[1]):
        _add_term(t, Vr[:, t], Vi[:, t], tcr, tci, xir, xii, exps, use_coef, use_xi, S)
