"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_kernels`` extension; the test suite runs both on the same inputs.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ._bits import U64, mask
from ._stream import small_bias_words

BACKEND = "python"

_TABLE_MAX_W = 12


def gf_mul(a: int, b: int, w: int, poly: int) -> int:
    """Product in GF(2^w) with full modulus ``poly`` (bit ``w`` set); ``w <= 63``."""
    r = 0
    top = 1 << w
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


@lru_cache(maxsize=16)
def _mul_table(w: int, poly: int) -> np.ndarray:
    size = 1 << w
    a = np.arange(size, dtype=U64)
    table = np.empty((size, size), dtype=np.uint16 if w <= 16 else U64)
    for b in range(size):
        table[:, b] = _mul_vec(a, np.full(size, b, dtype=U64), w, poly)
    return table


def _mul_vec(a: np.ndarray, b: np.ndarray, w: int, poly: int) -> np.ndarray:
    a = a.astype(U64, copy=True)
    b = b.astype(U64, copy=True)
    r = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=U64)
    one = U64(1)
    wbit = U64(w)
    p = U64(poly)
    zero = U64(0)
    for _ in range(w):
        r ^= a & (zero - (b & one))
        b >>= one
        a = a << one
        a ^= p & (zero - ((a >> wbit) & one))
    return r


def gf_mul_array(a: np.ndarray, b: np.ndarray, w: int, poly: int) -> np.ndarray:
    a = np.asarray(a, dtype=U64)
    b = np.asarray(b, dtype=U64)
    if w <= _TABLE_MAX_W:
        return _mul_table(w, poly)[a, b].astype(U64)
    return _mul_vec(a, b, w, poly)


def poly_eval_batch(coeffs: np.ndarray, w: int, poly: int, alphas: np.ndarray, m: int) -> np.ndarray:
    """Evaluate ``sum_j coeffs[s, j] * alpha^j`` at each alpha; keep the low ``m`` bits.

    Args:
        coeffs: (S, ell) uint64 coefficients, constant term first.
        w: field degree, at most 63.
        poly: full modulus.
        alphas: (T,) or (S, T) uint64 evaluation points.
        m: output width.

    Returns:
        (S, T) uint64 array.
    """
    coeffs = np.asarray(coeffs, dtype=U64)
    alphas = np.asarray(alphas, dtype=U64)
    S, ell = coeffs.shape
    if alphas.ndim == 1:
        alphas = np.broadcast_to(alphas, (S, alphas.shape[0]))
    acc = np.broadcast_to(coeffs[:, ell - 1 : ell], alphas.shape).copy()
    for j in range(ell - 2, -1, -1):
        acc = gf_mul_array(acc, alphas, w, poly) ^ coeffs[:, j : j + 1]
    if m < 64:
        acc &= U64(mask(m))
    return acc


def toeplitz_batch(xs: np.ndarray, ys: np.ndarray, n_x: int, m: int) -> np.ndarray:
    """Toeplitz hash: output bit r is ``XOR_c x_c * y_{r + n_x - 1 - c}``.

    Args:
        xs: (S,) uint64 sources of ``n_x <= 64`` bits.
        ys: (S, T) uint64 hash seeds of ``n_x + m - 1 <= 64`` bits.

    Returns:
        (S, T) uint64 array of ``m``-bit outputs.
    """
    xs = np.asarray(xs, dtype=U64)
    ys = np.asarray(ys, dtype=U64)
    out = np.zeros(ys.shape, dtype=U64)
    msk = U64(mask(m))
    zero = U64(0)
    for c in range(n_x):
        sel = zero - ((xs >> U64(c)) & U64(1))
        out ^= (ys >> U64(n_x - 1 - c)) & sel[:, None]
    return out & msk


def lfsr_extend(words: np.ndarray, taps: np.ndarray, L: int, start: int) -> None:
    """Fill ``words[start:]`` in place from ``W_j = XOR_{i in taps} W_{j-i}``.

    Valid for ``start >= L``. Uses the strided form ``W_j = XOR W_{j - i*B}``
    (``j >= L*B``) with the largest admissible power-of-two ``B`` so that each
    numpy operation covers a whole block.
    """
    n = words.shape[0]
    if len(taps) == 0:
        words[start:] = 0
        return
    taps = np.asarray(taps, dtype=np.int64)
    j = start
    while j < n:
        B = 1 << max(0, (j // max(L, 1)).bit_length() - 1)
        end = min(j + B, n)
        size = end - j
        acc = np.zeros(size, dtype=U64)
        for tap in taps:
            lo = j - int(tap) * B
            acc ^= words[lo : lo + size]
        words[j:end] = acc
        j = end


def small_bias_words_batch(
    x_lo: np.ndarray,
    x_hi: np.ndarray,
    y_lo: np.ndarray,
    y_hi: np.ndarray,
    k: int,
    red_lo: int,
    red_hi: int,
    nwords: int,
) -> np.ndarray:
    """Small-bias streams for many seeds with ``k <= 127``.

    ``x`` and ``y`` are split into low and high 64-bit halves; ``red`` is the
    modulus without its leading ``x^k`` term (the fallback recomputes it).

    Returns:
        (S, nwords) uint64 array.
    """
    S = len(x_lo)
    out = np.zeros((S, nwords), dtype=U64)
    for s in range(S):
        x = int(x_lo[s]) | (int(x_hi[s]) << 64)
        y = int(y_lo[s]) | (int(y_hi[s]) << 64)
        out[s] = small_bias_words(x, y, k, nwords, lfsr_extend)
    return out
