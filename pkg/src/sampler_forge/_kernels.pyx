# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef extern from *:
    """
    typedef unsigned __int128 sf_u128;
    static inline int sf_parity64(unsigned long long v) { return __builtin_parityll(v); }
    static inline int sf_parity128(sf_u128 v) {
        return __builtin_parityll((unsigned long long)v) ^ __builtin_parityll((unsigned long long)(v >> 64));
    }
    """
    ctypedef unsigned long long u128 "sf_u128"
    int sf_parity64(uint64_t v) nogil
    int sf_parity128(u128 v) nogil

BACKEND = "compiled"


cdef inline uint64_t _mul64(uint64_t a, uint64_t b, int w, uint64_t poly) nogil:
    cdef uint64_t r = 0
    cdef uint64_t top = (<uint64_t>1) << w
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


cdef inline u128 _mul128(u128 a, u128 b, int k, u128 red, u128 msk) nogil:
    cdef u128 r = 0
    cdef u128 top = (<u128>1) << (k - 1)
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        if a & top:
            a = ((a << 1) & msk) ^ red
        else:
            a <<= 1
    return r


def gf_mul(uint64_t a, uint64_t b, int w, uint64_t poly):
    return _mul64(a, b, w, poly)


def gf_mul_array(a, b, int w, uint64_t poly):
    a_b, b_b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
    shape = a_b.shape
    cdef const uint64_t[::1] av = np.ascontiguousarray(a_b).ravel()
    cdef const uint64_t[::1] bv = np.ascontiguousarray(b_b).ravel()
    out = np.empty(av.shape[0], dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            ov[i] = _mul64(av[i], bv[i], w, poly)
    return out.reshape(shape)


def poly_eval_batch(coeffs, int w, uint64_t poly, alphas, int m):
    cdef const uint64_t[:, ::1] cv = np.ascontiguousarray(coeffs, dtype=np.uint64)
    cdef Py_ssize_t S = cv.shape[0]
    cdef Py_ssize_t ell = cv.shape[1]
    al = np.asarray(alphas, dtype=np.uint64)
    if al.ndim == 1:
        al = np.broadcast_to(al, (S, al.shape[0]))
    cdef const uint64_t[:, ::1] av = np.ascontiguousarray(al)
    cdef Py_ssize_t T = av.shape[1]
    out = np.empty((S, T), dtype=np.uint64)
    cdef uint64_t[:, ::1] ov = out
    cdef uint64_t msk = ~(<uint64_t>0) if m >= 64 else (((<uint64_t>1) << m) - 1)
    cdef Py_ssize_t s, i, j
    cdef uint64_t acc, alpha
    with nogil:
        for s in range(S):
            for i in range(T):
                alpha = av[s, i]
                acc = cv[s, ell - 1]
                for j in range(ell - 2, -1, -1):
                    acc = _mul64(acc, alpha, w, poly) ^ cv[s, j]
                ov[s, i] = acc & msk
    return out


def toeplitz_batch(xs, ys, int n_x, int m):
    cdef const uint64_t[::1] xv = np.ascontiguousarray(xs, dtype=np.uint64)
    cdef const uint64_t[:, ::1] yv = np.ascontiguousarray(ys, dtype=np.uint64)
    cdef Py_ssize_t S = yv.shape[0]
    cdef Py_ssize_t T = yv.shape[1]
    out = np.empty((S, T), dtype=np.uint64)
    cdef uint64_t[:, ::1] ov = out
    cdef uint64_t msk = ~(<uint64_t>0) if m >= 64 else (((<uint64_t>1) << m) - 1)
    cdef Py_ssize_t s, i
    cdef int c
    cdef uint64_t x, y, acc
    with nogil:
        for s in range(S):
            x = xv[s]
            for i in range(T):
                y = yv[s, i]
                acc = 0
                for c in range(n_x):
                    if (x >> c) & 1:
                        acc ^= y >> (n_x - 1 - c)
                ov[s, i] = acc & msk
    return out


cdef void _lfsr_extend(uint64_t* w, Py_ssize_t n, const int64_t* taps, Py_ssize_t ntaps, Py_ssize_t start) nogil:
    cdef Py_ssize_t j, i
    cdef uint64_t acc
    for j in range(start, n):
        acc = 0
        for i in range(ntaps):
            acc ^= w[j - taps[i]]
        w[j] = acc


def lfsr_extend(words, taps, Py_ssize_t L, Py_ssize_t start):
    cdef uint64_t[::1] wv = words
    cdef int64_t[::1] tv = np.ascontiguousarray(taps, dtype=np.int64)
    cdef Py_ssize_t ntaps = tv.shape[0]
    if ntaps == 0:
        words[start:] = 0
        return
    with nogil:
        _lfsr_extend(&wv[0], wv.shape[0], &tv[0], ntaps, start)


cdef void _small_bias_one(u128 x, u128 y, int k, u128 red, uint64_t* out,
                          Py_ssize_t nwords, unsigned char* bits, int64_t* taps) nogil:
    cdef u128 msk = (((<u128>1) << (k - 1)) << 1) - 1
    cdef int n2 = 2 * k
    cdef int i, j
    cdef u128 cur = x
    for i in range(n2):
        bits[i] = sf_parity128(cur & y)
        cur = _mul128(cur, x, k, red, msk)
    # Berlekamp-Massey on the first 2k bits.
    cdef u128 C = 1, B = 1, T, rev = 0
    cdef int L = 0, shift = 1
    for i in range(n2):
        rev = (rev << 1) | bits[i]
        if sf_parity128(C & rev):
            T = C
            C ^= B << shift
            if 2 * L <= i:
                L = i + 1 - L
                B = T
                shift = 1
            else:
                shift += 1
        else:
            shift += 1
    cdef Py_ssize_t nbits = 64 * nwords
    cdef Py_ssize_t prefix_words = nwords if nwords < L + 1 else L + 1
    cdef Py_ssize_t prefix_bits = 64 * prefix_words
    cdef Py_ssize_t p
    cdef u128 window = 0
    cdef u128 tapmask = C >> 1
    cdef int b
    for p in range(prefix_words):
        out[p] = 0
    for p in range(prefix_bits):
        if p < n2:
            b = bits[p]
        elif L == 0:
            b = 0
        else:
            b = sf_parity128(window & tapmask)
        if b:
            out[p >> 6] |= (<uint64_t>1) << (p & 63)
        window = (window << 1) | b
    if prefix_words < nwords:
        j = 0
        for i in range(1, L + 1):
            if (C >> i) & 1:
                taps[j] = i
                j += 1
        if j == 0:
            for p in range(prefix_words, nwords):
                out[p] = 0
        else:
            _lfsr_extend(out, nwords, taps, j, prefix_words)


def small_bias_words_batch(x_lo, x_hi, y_lo, y_hi, int k, uint64_t red_lo, uint64_t red_hi, Py_ssize_t nwords):
    if not 1 <= k <= 127:
        raise ValueError("compiled small-bias kernel handles 1 <= k <= 127")
    cdef const uint64_t[::1] xl = np.ascontiguousarray(x_lo, dtype=np.uint64)
    cdef const uint64_t[::1] xh = np.ascontiguousarray(x_hi, dtype=np.uint64)
    cdef const uint64_t[::1] yl = np.ascontiguousarray(y_lo, dtype=np.uint64)
    cdef const uint64_t[::1] yh = np.ascontiguousarray(y_hi, dtype=np.uint64)
    cdef Py_ssize_t S = xl.shape[0]
    out = np.zeros((S, nwords), dtype=np.uint64)
    if nwords == 0 or S == 0:
        return out
    cdef uint64_t[:, ::1] ov = out
    cdef u128 red = ((<u128>red_hi) << 64) | red_lo
    cdef unsigned char* bits = <unsigned char*>malloc(2 * k + 1)
    cdef int64_t* taps = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    cdef Py_ssize_t s
    cdef u128 x, y
    try:
        with nogil:
            for s in range(S):
                x = ((<u128>xh[s]) << 64) | xl[s]
                y = ((<u128>yh[s]) << 64) | yl[s]
                _small_bias_one(x, y, k, red, &ov[s, 0], nwords, bits, taps)
    finally:
        free(bits)
        free(taps)
    return out
