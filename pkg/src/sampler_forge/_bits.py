"""Packing helpers between Python ints, uint64 word arrays and point arrays.

Words are little-endian: bit ``i`` of a stream lives in word ``i // 64`` at
position ``i % 64``.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64
ALL_ONES = (1 << 64) - 1


def mask(bits: int) -> int:
    return (1 << bits) - 1


def int_to_words(value: int, nwords: int) -> np.ndarray:
    if nwords == 0:
        return np.zeros(0, dtype=U64)
    return np.frombuffer(value.to_bytes(8 * nwords, "little"), dtype="<u8").astype(U64)


def words_to_int(words: np.ndarray) -> int:
    return int.from_bytes(np.ascontiguousarray(words, dtype="<u8").tobytes(), "little")


def ints_to_words(values, nwords: int) -> np.ndarray:
    """Pack a sequence of non-negative ints into an (S, nwords) word array."""
    out = np.zeros((len(values), nwords), dtype=U64)
    for i, v in enumerate(values):
        out[i] = int_to_words(int(v), nwords)
    return out


def extract_field(words: np.ndarray, start: int, count: int) -> np.ndarray:
    """Bits ``[start, start + count)`` of every row as (S, ceil(count/64)) words."""
    S, W = words.shape
    nout = (count + 63) // 64
    out = np.zeros((S, nout), dtype=U64)
    for j in range(nout):
        q, r = divmod(start + 64 * j, 64)
        v = words[:, q] >> U64(r) if q < W else np.zeros(S, dtype=U64)
        if r and q + 1 < W:
            v = v | (words[:, q + 1] << U64(64 - r))
        width = min(64, count - 64 * j)
        if width < 64:
            v = v & U64(mask(width))
        out[:, j] = v
    return out


def field_as_u64(words: np.ndarray, start: int, count: int) -> np.ndarray:
    """Like :func:`extract_field` for ``count <= 64``, returning shape (S,)."""
    if count > 64:
        raise ValueError("field wider than 64 bits")
    if count == 0:
        return np.zeros(words.shape[0], dtype=U64)
    return extract_field(words, start, count)[:, 0]


def words_to_points(words: np.ndarray, t: int, m: int) -> np.ndarray:
    """Cut each row of a packed bit stream into ``t`` consecutive ``m``-bit points.

    Returns a (S, t) uint64 array; requires ``1 <= m <= 64``.
    """
    S, nw = words.shape
    if not 1 <= m <= 64:
        raise ValueError("words_to_points handles 1 <= m <= 64")
    if t * m > 64 * nw:
        raise ValueError("stream too short for the requested points")
    padded = np.zeros((S, nw + 1), dtype=U64)
    padded[:, :nw] = words
    starts = np.arange(t, dtype=np.int64) * m
    q = starts >> 6
    r = (starts & 63).astype(U64)
    out = padded[:, q] >> r
    spill = (starts & 63) + m > 64
    if spill.any():
        qs = q[spill]
        rs = r[spill]
        out[:, spill] |= padded[:, qs + 1] << (U64(64) - rs)
    if m < 64:
        out &= U64(mask(m))
    return out


def stream_to_points_obj(stream: int, t: int, m: int) -> np.ndarray:
    """Points wider than 64 bits, as an object array of Python ints."""
    msk = mask(m)
    data = stream.to_bytes((t * m + 7) // 8 + 1, "little")
    out = np.empty(t, dtype=object)
    for i in range(t):
        lo = (i * m) // 8
        hi = ((i + 1) * m + 7) // 8
        out[i] = (int.from_bytes(data[lo:hi], "little") >> ((i * m) % 8)) & msk
    return out


def points_to_stream(points, m: int) -> int:
    value = 0
    for i, p in enumerate(points):
        value |= int(p) << (i * m)
    return value
