# cython: language_level=3
"""Compiled accumulation kernels (OpenMP over points).

Same arithmetic, in the same order per (point, term), as ``_fallback``.
Each point is owned by one thread, so results do not depend on the thread
count.
"""
from cython.parallel cimport prange

NAME = "cython"

cdef int _threads = 1


def set_num_threads(int n):
    global _threads
    _threads = n if n > 0 else 1
    return _threads


cdef inline void _cpow(double zr, double zi, long long j, double *outr, double *outi) noexcept nogil:
    cdef double rr = 1.0, ri = 0.0, tr
    if j < 0:
        zi = -zi
        j = -j
    while j:
        if j & 1:
            tr = rr * zr - ri * zi
            ri = rr * zi + ri * zr
            rr = tr
        j >>= 1
        if j:
            tr = zr * zr - zi * zi
            zi = zr * zi + zi * zr
            zr = tr
    outr[0] = rr
    outi[0] = ri


cdef inline void _kahan(double vr, double vi, Py_ssize_t t, Py_ssize_t i,
                        const double[::1] tcr, const double[::1] tci,
                        const double[::1] xir, const double[::1] xii,
                        const long long[::1] exps, bint use_coef, bint use_xi,
                        double *sr, double *si, double *cr_, double *ci_) noexcept nogil:
    cdef double cr, ci, pr, pi, tr, ti, y, s
    if use_coef:
        cr = tcr[t]
        ci = tci[t]
        if use_xi:
            _cpow(xir[i], xii[i], exps[t], &pr, &pi)
            tr = cr * pr - ci * pi
            ci = cr * pi + ci * pr
            cr = tr
        tr = cr * vr - ci * vi
        ti = cr * vi + ci * vr
    else:
        tr = vr
        ti = vi
    y = tr - cr_[0]
    s = sr[0] + y
    cr_[0] = (s - sr[0]) - y
    sr[0] = s
    y = ti - ci_[0]
    s = si[0] + y
    ci_[0] = (s - si[0]) - y
    si[0] = s


def char_accumulate(const double[:, ::1] ar, const double[:, ::1] ai,
                    const double[:, ::1] psr, const double[:, ::1] psi,
                    const double[::1] tcr, const double[::1] tci,
                    const double[::1] xir, const double[::1] xii,
                    const long long[::1] exps, bint use_coef, bint use_xi,
                    double[::1] Sr, double[::1] Si, double[::1] Cr, double[::1] Ci):
    cdef Py_ssize_t n = ar.shape[0], N = ar.shape[1], m = psr.shape[0]
    cdef Py_ssize_t i, t, q
    cdef double vr, vi, br, bi, sr, si, cr, ci
    for i in prange(n, nogil=True, schedule="static", num_threads=_threads):
        sr = Sr[i]
        si = Si[i]
        cr = Cr[i]
        ci = Ci[i]
        for t in range(m):
            vr = 0.0
            vi = 0.0
            for q in range(N):
                br = ar[i, q] * psr[t, q] - ai[i, q] * psi[t, q]
                bi = ar[i, q] * psi[t, q] + ai[i, q] * psr[t, q]
                vr = vr + br
                vi = vi + bi
            _kahan(vr, vi, t, i, tcr, tci, xir, xii, exps, use_coef, use_xi,
                   &sr, &si, &cr, &ci)
        Sr[i] = sr
        Si[i] = si
        Cr[i] = cr
        Ci[i] = ci


def value_accumulate(const double[:, ::1] Vr, const double[:, ::1] Vi,
                     const double[::1] tcr, const double[::1] tci,
                     const double[::1] xir, const double[::1] xii,
                     const long long[::1] exps, bint use_coef, bint use_xi,
                     double[::1] Sr, double[::1] Si, double[::1] Cr, double[::1] Ci):
    cdef Py_ssize_t n = Vr.shape[0], m = Vr.shape[1]
    cdef Py_ssize_t i, t
    cdef double sr, si, cr, ci
    for i in prange(n, nogil=True, schedule="static", num_threads=_threads):
        sr = Sr[i]
        si = Si[i]
        cr = Cr[i]
        ci = Ci[i]
        for t in range(m):
            _kahan(Vr[i, t], Vi[i, t], t, i, tcr, tci, xir, xii, exps, use_coef, use_xi,
                   &sr, &si, &cr, &ci)
        Sr[i] = sr
        Si[i] = si
        Cr[i] = cr
        Ci[i] = ci
