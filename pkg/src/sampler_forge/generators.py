"""Pairwise, exact l-wise and almost l-wise independent sample sequences.

Every generator maps a seed (a Python int holding ``seed_bits`` bits) to ``t``
points of ``m`` bits. Points are returned as a uint64 array when ``m <= 64``
and as an object array of Python ints otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from ._bits import (
    U64,
    extract_field,
    field_as_u64,
    int_to_words,
    mask,
    stream_to_points_obj,
    words_to_int,
    words_to_points,
)
from ._stream import small_bias_words
from .bitcore import (
    BitString,
    Multiplier,
    SeedLedger,
    ceil_log2,
    gf_mul,
    gf_pow,
    irreducible_modulus,
)
from .errors import BadSeedLength, BudgetExceeded, IndexOutOfRange, SpecInvalid

__all__ = [
    "AlmostKWiseSpec",
    "SampleSequence",
    "UniformGenerator",
    "ExactKWiseGenerator",
    "AlmostKWiseGenerator",
    "small_bias_seed_degree",
    "small_bias_sample",
    "almost_kwise_sample",
    "exact_kwise_sample",
    "marginal_distance_oracle",
    "marginal_distances",
    "as_fraction",
]

_MAX_KERNEL_K = 127
# Longest stream materialized by ``generate_at``; beyond this it uses random access.
_MAX_STREAM_BITS = 1 << 28
_MAX_KERNEL_W = 63


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float (via its repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class SampleSequence:
    """The ``t`` points of one sampler invocation."""

    points: np.ndarray
    m: int

    def __post_init__(self):
        if self.points.ndim != 1:
            raise ValueError("points must be one-dimensional")

    @property
    def t(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.t

    def __getitem__(self, i: int) -> BitString:
        return BitString(int(self.points[i]), self.m)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSequence):
            return NotImplemented
        return self.m == other.m and self.t == other.t and all(
            int(a) == int(b) for a, b in zip(self.points, other.points)
        )

    def bitstrings(self) -> list[BitString]:
        return [BitString(int(p), self.m) for p in self.points]

    def to_bytes(self) -> bytes:
        """``t`` consecutive points, each packed LSB-first into ``ceil(m/8)`` bytes."""
        width = (self.m + 7) // 8
        if self.points.dtype == U64 and width <= 8:
            raw = self.points.astype("<u8").view(np.uint8).reshape(self.t, 8)
            return raw[:, :width].tobytes()
        return b"".join(int(p).to_bytes(width, "little") for p in self.points)

    @classmethod
    def from_bytes(cls, data: bytes, t: int, m: int) -> "SampleSequence":
        width = (m + 7) // 8
        if len(data) != t * width:
            raise ValueError(f"expected {t * width} bytes, got {len(data)}")
        vals = [int.from_bytes(data[i * width : (i + 1) * width], "little") for i in range(t)]
        if any(v >> m for v in vals):
            raise ValueError("a point has bits set above position m")
        return cls(_as_points(vals, m), m)


def _as_points(values: Iterable[int], m: int) -> np.ndarray:
    values = list(values)
    if m <= 64:
        return np.array(values, dtype=U64)
    out = np.empty(len(values), dtype=object)
    out[:] = values
    return out


def _check_seed(seed: int, seed_bits: int) -> None:
    if seed < 0 or seed >> seed_bits:
        raise BadSeedLength(f"seed does not fit in {seed_bits} bits")


class _Generator:
    """Shared plumbing; subclasses define ``t``, ``m``, ``seed_bits`` and the maps."""

    t: int
    m: int
    seed_bits: int
    ell: int | None = None

    def read_seed(self, ledger: SeedLedger) -> int:
        return ledger.draw(self.seed_bits).value

    def generate(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def generate_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        return self.generate(seed)[np.asarray(indices, dtype=np.int64)]

    def point(self, seed: int, index: int) -> int:
        if not 0 <= index < self.t:
            raise IndexOutOfRange(f"index {index} outside [0, {self.t})")
        return int(self.generate_at(seed, np.array([index]))[0])

    def generate_batch(self, seed_words: np.ndarray) -> np.ndarray:
        """Points for many seeds at once.

        Args:
            seed_words: (S, W) uint64 seeds, little-endian words.

        Returns:
            (S, t) uint64 array (requires ``m <= 64``).
        """
        seed_words = np.atleast_2d(np.asarray(seed_words, dtype=U64))
        out = np.empty((seed_words.shape[0], self.t), dtype=U64)
        for s in range(seed_words.shape[0]):
            out[s] = self.generate(words_to_int(seed_words[s]))
        return out

    def sequence(self, seed: BitString) -> SampleSequence:
        if seed.length != self.seed_bits:
            raise BadSeedLength(f"seed has {seed.length} bits, expected {self.seed_bits}")
        return SampleSequence(self.generate(seed.value), self.m)


class UniformGenerator(_Generator):
    """``t`` fully independent points read straight off the seed."""

    def __init__(self, t: int, m: int):
        if t < 1 or m < 1:
            raise SpecInvalid("t and m must be positive")
        self.t = t
        self.m = m
        self.seed_bits = t * m

    def read_seed(self, ledger: SeedLedger) -> int:
        value = 0
        for i in range(self.t):
            value |= ledger.draw(self.m).value << (i * self.m)
        return value

    def generate(self, seed: int) -> np.ndarray:
        _check_seed(seed, self.seed_bits)
        if self.m > 64:
            return stream_to_points_obj(seed, self.t, self.m)
        nw = (self.seed_bits + 63) // 64
        return words_to_points(int_to_words(seed, nw)[None, :], self.t, self.m)[0]

    def generate_batch(self, seed_words: np.ndarray) -> np.ndarray:
        seed_words = np.atleast_2d(np.asarray(seed_words, dtype=U64))
        return words_to_points(seed_words, self.t, self.m)


class ExactKWiseGenerator(_Generator):
    """Points ``p(alpha_i)`` of a random degree ``ell - 1`` polynomial over GF(2^w).

    ``w = max(m, ceil(log2 t))``, ``alpha_i`` is the field element with binary
    encoding ``i`` and each value is truncated to its low ``m`` bits. The seed
    holds the coefficients ``c_0, c_1, ...`` in ``w``-bit blocks.
    """

    def __init__(self, t: int, m: int, ell: int):
        if t < 1 or m < 1 or ell < 1:
            raise SpecInvalid("t, m and ell must be positive")
        self.t = t
        self.m = m
        self.ell = ell
        self.w = max(m, ceil_log2(t))
        self.seed_bits = ell * self.w
        self.poly = irreducible_modulus(self.w)

    def coefficients(self, seed: int) -> list[int]:
        msk = mask(self.w)
        return [(seed >> (j * self.w)) & msk for j in range(self.ell)]

    def read_seed(self, ledger: SeedLedger) -> int:
        value = 0
        for j in range(self.ell):
            value |= ledger.draw(self.w).value << (j * self.w)
        return value

    def _eval_python(self, coeffs: Sequence[int], alphas: Iterable[int]) -> list[int]:
        msk = mask(self.m)
        out = []
        for a in alphas:
            acc = coeffs[-1]
            for c in reversed(coeffs[:-1]):
                acc = gf_mul(acc, int(a), self.w) ^ c
            out.append(acc & msk)
        return out

    def generate_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        _check_seed(seed, self.seed_bits)
        coeffs = self.coefficients(seed)
        if self.w <= _MAX_KERNEL_W:
            c = np.array([coeffs], dtype=U64)
            return kernels.poly_eval_batch(c, self.w, self.poly, np.asarray(indices, dtype=U64), self.m)[0]
        return _as_points(self._eval_python(coeffs, indices), self.m)

    def generate(self, seed: int) -> np.ndarray:
        return self.generate_at(seed, np.arange(self.t, dtype=U64))

    def generate_batch(self, seed_words: np.ndarray, indices: np.ndarray | None = None) -> np.ndarray:
        seed_words = np.atleast_2d(np.asarray(seed_words, dtype=U64))
        if self.m > 64:
            raise SpecInvalid("batch evaluation needs m <= 64")
        if indices is None:
            indices = np.arange(self.t, dtype=U64)
        if self.w > _MAX_KERNEL_W:
            idx = np.broadcast_to(indices, (seed_words.shape[0], np.shape(indices)[-1]))
            return np.array(
                [self.generate_at(words_to_int(row), ix) for row, ix in zip(seed_words, idx)], dtype=U64
            )
        coeffs = np.stack(
            [field_as_u64(seed_words, j * self.w, self.w) for j in range(self.ell)], axis=1
        )
        return kernels.poly_eval_batch(coeffs, self.w, self.poly, np.asarray(indices, dtype=U64), self.m)


def small_bias_seed_degree(N: int, bias) -> int:
    """Field degree ``k = ceil(log2(N / bias))``; the seed is ``2k`` bits."""
    bias = as_fraction(bias)
    if N < 1:
        raise SpecInvalid("N must be at least 1")
    if not 0 < bias < 1:
        raise SpecInvalid("bias must lie in (0, 1)")
    return ceil_log2(Fraction(N) / bias)


def _stream_words(x: int, y: int, k: int, nwords: int) -> np.ndarray:
    if k <= _MAX_KERNEL_K:
        red = irreducible_modulus(k) ^ (1 << k)
        lo = np.array([x & mask(64)], dtype=U64)
        hi = np.array([x >> 64], dtype=U64)
        ylo = np.array([y & mask(64)], dtype=U64)
        yhi = np.array([y >> 64], dtype=U64)
        return kernels.small_bias_words_batch(lo, hi, ylo, yhi, k, red & mask(64), red >> 64, nwords)[0]
    return small_bias_words(x, y, k, nwords, kernels.lfsr_extend)


def small_bias_sample(seed: BitString, N: int, bias) -> BitString:
    """``N`` bits ``<x^(i+1), y>`` with ``(x, y)`` the two halves of the seed.

    Over a uniform seed every nonzero linear test on the output has bias at
    most ``N / 2^k <= bias``, measured as ``|E (-1)^<T, z>|``.
    """
    k = small_bias_seed_degree(N, bias)
    if seed.length != 2 * k:
        raise BadSeedLength(f"seed has {seed.length} bits, expected {2 * k}")
    x = seed.value & mask(k)
    y = seed.value >> k
    nw = (N + 63) // 64
    return BitString(words_to_int(_stream_words(x, y, k, nw)) & mask(N), N)


@dataclass(frozen=True)
class AlmostKWiseSpec:
    """Parameters of a gamma-almost ell-wise independent sequence of ``t`` points."""

    t: int
    m: int
    ell: int
    gamma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_fraction(self.gamma))
        if self.t < 1 or self.m < 1:
            raise SpecInvalid("t and m must be positive")
        if self.ell < 2 or self.ell % 2:
            raise SpecInvalid(f"ell must be an even integer >= 2, got {self.ell}")
        if not 0 < self.gamma < 1:
            raise SpecInvalid("gamma must lie in (0, 1)")

    @property
    def bias(self) -> Fraction:
        return self.gamma / (1 << (self.ell * self.m // 2))

    @property
    def k(self) -> int:
        # ceil(log2(tm * 2^(ell m / 2) / gamma)) = ell m / 2 + ceil(log2(tm / gamma))
        return self.ell * self.m // 2 + ceil_log2(Fraction(self.t * self.m) / self.gamma)

    @property
    def seed_bits(self) -> int:
        return 2 * self.k


class AlmostKWiseGenerator(_Generator):
    """Row-major reshaping of a small-bias stream of ``t * m`` bits."""

    def __init__(self, spec: AlmostKWiseSpec):
        self.spec = spec
        self.t = spec.t
        self.m = spec.m
        self.ell = spec.ell
        self.k = spec.k
        self.seed_bits = 2 * self.k
        self.nwords = (self.t * self.m + 63) // 64

    def read_seed(self, ledger: SeedLedger) -> int:
        x = ledger.draw(self.k).value
        y = ledger.draw(self.k).value
        return x | (y << self.k)

    def _split(self, seed: int) -> tuple[int, int]:
        _check_seed(seed, self.seed_bits)
        return seed & mask(self.k), seed >> self.k

    def generate(self, seed: int) -> np.ndarray:
        x, y = self._split(seed)
        words = _stream_words(x, y, self.k, self.nwords)
        if self.m > 64:
            return stream_to_points_obj(words_to_int(words), self.t, self.m)
        return words_to_points(words[None, :], self.t, self.m)[0]

    def generate_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        """Points at ``indices``; uses random access when the stream would be costlier.

        Each random access costs about ``2k + m`` field multiplications in
        Python, against roughly a nanosecond per stream bit in the kernel.
        """
        idx = np.asarray(indices, dtype=np.int64)
        stream_bits = self.t * self.m
        if stream_bits <= _MAX_STREAM_BITS and idx.size * (2 * self.k + self.m) * 2000 >= stream_bits:
            return super().generate_at(seed, idx)
        values = [self.point(seed, int(i)) for i in idx]
        return _as_points(values, self.m)

    def point(self, seed: int, index: int) -> int:
        """Random access to one point without producing the whole stream."""
        if not 0 <= index < self.t:
            raise IndexOutOfRange(f"index {index} outside [0, {self.t})")
        x, y = self._split(seed)
        cur = gf_pow(x, index * self.m + 1, self.k)
        mul = Multiplier(x, self.k)
        value = 0
        for j in range(self.m):
            value |= ((cur & y).bit_count() & 1) << j
            cur = mul(cur)
        return value

    def generate_batch(self, seed_words: np.ndarray) -> np.ndarray:
        seed_words = np.atleast_2d(np.asarray(seed_words, dtype=U64))
        if self.m > 64:
            raise SpecInvalid("batch evaluation needs m <= 64")
        if self.k > _MAX_KERNEL_K:
            return super().generate_batch(seed_words)
        xs = extract_field(seed_words, 0, self.k)
        ys = extract_field(seed_words, self.k, self.k)
        zero = np.zeros(seed_words.shape[0], dtype=U64)
        x_hi = xs[:, 1] if xs.shape[1] > 1 else zero
        y_hi = ys[:, 1] if ys.shape[1] > 1 else zero
        red = irreducible_modulus(self.k) ^ (1 << self.k)
        words = kernels.small_bias_words_batch(
            xs[:, 0], x_hi, ys[:, 0], y_hi, self.k, red & mask(64), red >> 64, self.nwords
        )
        return words_to_points(words, self.t, self.m)


def almost_kwise_sample(seed: BitString, spec: AlmostKWiseSpec) -> SampleSequence:
    return AlmostKWiseGenerator(spec).sequence(seed)


def exact_kwise_sample(seed: BitString, t: int, m: int, ell: int) -> SampleSequence:
    return ExactKWiseGenerator(t, m, ell).sequence(seed)


def marginal_distance_oracle(generator, subset: Sequence[int], budget: int = 1 << 30) -> Fraction:
    """Exact statistical distance of a subset marginal from uniform.

    Enumerates every seed and counts the joint outcomes of the chosen points.

    Args:
        generator: any generator exposing ``seed_bits``, ``t``, ``m`` and
            ``generate_batch``.
        subset: distinct point indices, at most ``generator.ell`` of them
            when the generator declares an independence order.
        budget: cap on ``2^seed_bits * 2^(m |subset|)``.

    Returns:
        The distance as an exact Fraction.
    """
    return marginal_distances(generator, [subset], budget)[0]


def marginal_distances(generator, subsets: Sequence[Sequence[int]], budget: int = 1 << 30) -> list[Fraction]:
    """:func:`marginal_distance_oracle` for several subsets in one seed sweep."""
    subsets = [list(S) for S in subsets]
    ell = getattr(generator, "ell", None)
    n = generator.seed_bits
    for S in subsets:
        if len(set(S)) != len(S):
            raise SpecInvalid("subset indices must be distinct")
        if any(not 0 <= i < generator.t for i in S):
            raise IndexOutOfRange("subset index outside [0, t)")
        if ell is not None and len(S) > ell:
            raise SpecInvalid(f"subset of size {len(S)} exceeds the independence order {ell}")
        if (1 << (n + generator.m * len(S))) > budget:
            raise BudgetExceeded(
                f"2^{n} seeds x 2^{generator.m * len(S)} outcomes exceeds the budget {budget}"
            )
    live = [S for S in subsets if S]
    counts = [np.zeros(1 << (generator.m * len(S)), dtype=np.int64) for S in live]
    chunk = 1 << 14
    if live:
        for start in range(0, 1 << n, chunk):
            seeds = np.arange(start, min(start + chunk, 1 << n), dtype=U64)[:, None]
            pts = generator.generate_batch(seeds)
            for S, cnt in zip(live, counts):
                key = np.zeros(pts.shape[0], dtype=U64)
                for j, i in enumerate(S):
                    key |= pts[:, i] << U64(generator.m * j)
                cnt += np.bincount(key.astype(np.int64), minlength=cnt.shape[0])
    total = 1 << n
    out = []
    it = iter(counts)
    for S in subsets:
        if not S:
            out.append(Fraction(0))
            continue
        cnt = next(it)
        cells = cnt.shape[0]
        diff = sum(abs(int(c) * cells - total) for c in cnt)
        out.append(Fraction(diff, 2 * total * cells))
    return out
