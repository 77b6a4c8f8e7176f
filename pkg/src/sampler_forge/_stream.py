"""Small-bias bit streams via Berlekamp-Massey and word-level LFSR extension.

The stream bit ``i`` is ``<x^(i+1), y>`` for ``x, y`` in GF(2^k). Its linear
complexity is at most ``k``, so the first ``2k`` bits pin down a connection
polynomial ``C`` of degree ``L <= k``. Because ``C(z)^64 = C(z^64)`` over
GF(2), the same taps relate whole 64-bit words: ``W_j = XOR_{c_i = 1} W_{j-i}``
for ``j >= L``. Only the first ``L + 1`` words are produced bit by bit.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ._bits import int_to_words
from .bitcore import Multiplier


def berlekamp_massey(seq: int, n: int) -> tuple[int, int]:
    """Shortest LFSR generating the first ``n`` bits of ``seq`` (bit i = s_i).

    Returns:
        ``(C, L)`` where bit ``j`` of ``C`` is the coefficient ``c_j`` (``c_0 = 1``)
        and ``s_i = XOR_{j=1..L} c_j s_{i-j}`` for ``L <= i < n``.
    """
    C = 1
    B = 1
    L = 0
    shift = 1
    rev = 0
    for i in range(n):
        rev = (rev << 1) | ((seq >> i) & 1)
        if (C & rev).bit_count() & 1:
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
    return C, L


def direct_bits(x: int, y: int, k: int, count: int) -> int:
    """Bits ``<x^(i+1), y>`` for ``i < count`` computed by repeated multiplication."""
    mul = Multiplier(x, k)
    cur = x
    out = 0
    for i in range(count):
        out |= ((cur & y).bit_count() & 1) << i
        cur = mul(cur)
    return out


def extend_bits(prefix: int, C: int, L: int, start: int, stop: int) -> int:
    """Run the bit recurrence from position ``start`` up to ``stop``."""
    if L == 0:
        return prefix & ((1 << start) - 1)
    taps = C >> 1
    msk = (1 << L) - 1
    window = 0
    for j in range(1, L + 1):
        window |= ((prefix >> (start - j)) & 1) << (j - 1)
    out = prefix & ((1 << start) - 1)
    for n in range(start, stop):
        b = (window & taps).bit_count() & 1
        out |= b << n
        window = ((window << 1) | b) & msk
    return out


def small_bias_words(
    x: int,
    y: int,
    k: int,
    nwords: int,
    lfsr_extend: Callable[[np.ndarray, np.ndarray, int, int], None],
) -> np.ndarray:
    """The first ``64 * nwords`` stream bits for one seed, packed into words."""
    nbits = 64 * nwords
    head = min(2 * k, nbits)
    bits = direct_bits(x, y, k, head)
    if head == nbits:
        return int_to_words(bits, nwords)
    C, L = berlekamp_massey(bits, 2 * k)
    prefix_words = min(nwords, L + 1)
    bits = extend_bits(bits, C, L, head, max(head, 64 * prefix_words))
    words = np.zeros(nwords, dtype=np.uint64)
    words[:prefix_words] = int_to_words(bits & ((1 << (64 * prefix_words)) - 1), prefix_words)
    if prefix_words < nwords:
        taps = np.array([j for j in range(1, L + 1) if (C >> j) & 1], dtype=np.int64)
        lfsr_extend(words, taps, L, prefix_words)
    return words
