"""Pure numpy implementation of the hot kernels.

Bit-for-bit twin of ``_kernels.pyx``; used when the compiled extension is not
available or when ``PSI_LAB_PURE_PYTHON`` is set.
"""

import numpy as np

BACKEND = "python"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_KEY_TAG = np.uint64(0x5053495F4C414221)
_TWO_M53 = 2.0**-53


def _mulhilo(a, b):
    # 64x64 -> 128 bit product split into 32-bit limbs
    a_lo, a_hi = a & _LO32, a >> _S32
    b_lo, b_hi = b & _LO32, b >> _S32
    t = a_lo * b_lo
    u = a_hi * b_lo + (t >> _S32)
    v = a_lo * b_hi + (u & _LO32)
    hi = a_hi * b_hi + (u >> _S32) + (v >> _S32)
    return hi, a * b


def philox4x64(counters, key):
    """Philox4x64-10 block function.

    Parameters
    ----------
    counters : (n, 4) uint64 array
    key : sequence of two uint64

    Returns
    -------
    (n, 4) uint64 array of random words.
    """
    ctr = np.asarray(counters, dtype=np.uint64).reshape(-1, 4)
    c0, c1, c2, c3 = (ctr[:, i].copy() for i in range(4))
    k0 = np.full(c0.shape, np.uint64(key[0]), dtype=np.uint64)
    k1 = np.full(c0.shape, np.uint64(key[1]), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for _ in range(10):
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    return np.stack([c0, c1, c2, c3], axis=1)


def binomial_counts(trials, prob, seed, stream=0):
    """Per-pixel binomial draws as sums of Bernoulli trials.

    Pixel ``i`` consumes uniforms from Philox counter blocks
    ``(i, b, stream, 0)`` under key ``(seed, tag)``; block ``b`` supplies
    draws ``4b .. 4b + 3``.
    """
    trials = np.ascontiguousarray(trials, dtype=np.int64).ravel()
    prob = np.ascontiguousarray(prob, dtype=np.float64).ravel()
    n_pix = trials.size
    nblocks = (trials + 3) // 4
    total = int(nblocks.sum())
    if total == 0:
        return np.zeros(n_pix, dtype=np.int64)
    pix = np.repeat(np.arange(n_pix, dtype=np.int64), nblocks)
    starts = np.cumsum(nblocks) - nblocks
    blk = np.arange(total, dtype=np.int64) - np.repeat(starts, nblocks)
    ctr = np.zeros((total, 4), dtype=np.uint64)
    ctr[:, 0] = pix.astype(np.uint64)
    ctr[:, 1] = blk.astype(np.uint64)
    ctr[:, 2] = np.uint64(stream)
    words = philox4x64(ctr, (np.uint64(seed), _KEY_TAG))
    u = (words >> _S11).astype(np.float64) * _TWO_M53
    lane = 4 * blk[:, None] + np.arange(4)[None, :]
    live = lane < trials[pix][:, None]
    hit = (u < prob[pix][:, None]) & live
    return np.bincount(pix, weights=hit.sum(axis=1), minlength=n_pix).astype(np.int64)


def fringe_normal_equations(x, f, p, k, phi, c):
    """Weighted Gauss-Newton system for the fringe model.

    Model ``m = (1 + c cos(k x + phi)) f / 2`` with weights ``1/f``.
    Returns ``(A, g, chi2)`` where ``A = J^T W J`` and ``g = J^T W r`` over
    parameters ``(k, phi, c)`` and ``chi2 = sum(r^2 / f)``.
    """
    x = np.asarray(x, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    ph = k * x + phi
    s = np.sin(ph)
    co = np.cos(ph)
    r = p - 0.5 * (1.0 + c * co) * f
    # J / f, J = (-c s x f / 2, -c s f / 2, co f / 2)
    jk = -0.5 * c * s * x
    jp = -0.5 * c * s
    jc = 0.5 * co
    jf = np.stack([jk, jp, jc])
    A = (jf * f) @ jf.T
    g = jf @ r
    chi2 = float(np.sum(r * r / f))
    return A, g, chi2
