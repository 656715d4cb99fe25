# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Philox4x64-10, per-pixel binomial sampling and the
weighted Gauss-Newton accumulation for the fringe model.

Must stay bit-compatible with ``_kernels_py`` for the random streams.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport sin, cos

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t psi_mulhilo64(uint64_t a, uint64_t b, uint64_t *hi) {
        __uint128_t p = (__uint128_t)a * (__uint128_t)b;
        *hi = (uint64_t)(p >> 64);
        return (uint64_t)p;
    }
    """
    uint64_t psi_mulhilo64(uint64_t a, uint64_t b, uint64_t *hi) nogil

BACKEND = "cython"

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL
cdef uint64_t KEY_TAG = 0x5053495F4C414221ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint64_t* c, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef uint64_t hi0, hi1, lo0, lo1, t1
    cdef int r
    for r in range(10):
        lo0 = psi_mulhilo64(M0, c[0], &hi0)
        lo1 = psi_mulhilo64(M1, c[2], &hi1)
        t1 = c[1]
        c[0] = hi1 ^ t1 ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0
        k0 += W0
        k1 += W1


def philox4x64(counters, key):
    """Philox4x64-10 block function over an ``(n, 4)`` uint64 counter array."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] ctr = np.ascontiguousarray(
        counters, dtype=np.uint64).reshape(-1, 4).copy()
    cdef uint64_t k0 = <uint64_t>int(key[0])
    cdef uint64_t k1 = <uint64_t>int(key[1])
    cdef Py_ssize_t i, n = ctr.shape[0]
    cdef uint64_t[:, ::1] cv = ctr
    with nogil:
        for i in range(n):
            _philox(&cv[i, 0], k0, k1)
    return ctr


def binomial_counts(trials, prob, seed, stream=0):
    """Per-pixel binomial draws as sums of Bernoulli trials (see ``_kernels_py``)."""
    cdef const int64_t[::1] tv = np.ascontiguousarray(trials, dtype=np.int64).ravel()
    cdef const double[::1] pv = np.ascontiguousarray(prob, dtype=np.float64).ravel()
    cdef Py_ssize_t n_pix = tv.shape[0]
    out = np.zeros(n_pix, dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef uint64_t k0 = <uint64_t>int(seed)
    cdef uint64_t st = <uint64_t>int(stream)
    cdef uint64_t c[4]
    cdef Py_ssize_t i
    cdef int64_t n, j, b, hits
    cdef int lane
    cdef double p
    with nogil:
        for i in range(n_pix):
            n = tv[i]
            p = pv[i]
            hits = 0
            b = 0
            j = 0
            while j < n:
                c[0] = <uint64_t>i
                c[1] = <uint64_t>b
                c[2] = st
                c[3] = 0
                _philox(c, k0, KEY_TAG)
                for lane in range(4):
                    if j < n:
                        if (<double>(c[lane] >> 11)) * TWO_M53 < p:
                            hits += 1
                        j += 1
                b += 1
            ov[i] = hits
    return out


def fringe_normal_equations(x, f, p, double k, double phi, double c):
    """Weighted Gauss-Newton system ``(A, g, chi2)`` for the fringe model."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0
    cdef double g0 = 0, g1 = 0, g2 = 0, chi2 = 0
    cdef double ph, s, co, r, jk, jp, jc, w
    with nogil:
        for i in range(n):
            w = fv[i]
            ph = k * xv[i] + phi
            s = sin(ph)
            co = cos(ph)
            r = yv[i] - 0.5 * (1.0 + c * co) * w
            jp = -0.5 * c * s
            jk = jp * xv[i]
            jc = 0.5 * co
            a00 += jk * jk * w
            a01 += jk * jp * w
            a02 += jk * jc * w
            a11 += jp * jp * w
            a12 += jp * jc * w
            a22 += jc * jc * w
            g0 += jk * r
            g1 += jp * r
            g2 += jc * r
            chi2 += r * r / w
    A = np.array([[a00, a01, a02], [a01, a11, a12], [a02, a12, a22]])
    g = np.array([g0, g1, g2])
    return A, g, chi2
