"""Bit strings, seed ledgers and GF(2)/GF(2^w) arithmetic.

Bit order everywhere is LSB-first: bit ``i`` of a :class:`BitString` is
``(value >> i) & 1`` and packed byte ``j`` holds bits ``8j .. 8j+7`` with bit
``8j`` in the least significant position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import DegreeMismatch, LengthMismatch, SpecInvalid, TapeExhausted

__all__ = [
    "BitString",
    "SeedLedger",
    "ledger_draw",
    "inner_product_gf2",
    "FieldElement",
    "gf2w_mul",
    "gf_mul",
    "gf_pow",
    "Multiplier",
    "clmul",
    "clsquare",
    "is_irreducible",
    "irreducible_modulus",
    "modulus_exponents",
    "ceil_log2",
    "parity",
]


def parity(v: int) -> int:
    return v.bit_count() & 1


@dataclass(frozen=True)
class BitString:
    """An immutable string of ``length`` bits stored in a Python int."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(0, length)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        value = 0
        n = 0
        for n, b in enumerate(bits, start=1):
            if b not in (0, 1):
                raise ValueError(f"not a bit: {b!r}")
            value |= b << (n - 1)
        return cls(value, n)

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        """Parse ``"101101"``; the first character is bit 0."""
        return cls.from_bits(int(c) for c in text)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> "BitString":
        if length is None:
            length = 8 * len(data)
        if length > 8 * len(data):
            raise LengthMismatch(f"{len(data)} bytes cannot hold {length} bits")
        value = int.from_bytes(data, "little") & ((1 << length) - 1)
        return cls(value, length)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.length + 7) // 8, "little")

    def bits(self) -> list[int]:
        return [(self.value >> i) & 1 for i in range(self.length)]

    def slice(self, start: int, count: int) -> "BitString":
        if start < 0 or count < 0 or start + count > self.length:
            raise IndexError("slice out of range")
        return BitString((self.value >> start) & ((1 << count) - 1), count)

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self.value | (other.value << self.length), self.length + other.length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> i) & 1

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits())


@dataclass
class SeedLedger:
    """Sequential reader over a finite random tape.

    Every consumer of randomness draws from a ledger so that the number of
    bits a construction actually reads can be audited against what it
    declares.
    """

    tape: BitString
    cursor: int = 0
    draws: list[int] = field(default_factory=list, repr=False)

    @classmethod
    def of_length(cls, n: int, value: int = 0) -> "SeedLedger":
        return cls(BitString(value, n))

    @property
    def remaining(self) -> int:
        return self.tape.length - self.cursor

    def draw(self, count: int) -> BitString:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self.cursor + count > self.tape.length:
            raise TapeExhausted(
                f"draw of {count} bits at cursor {self.cursor} overruns a tape of {self.tape.length}"
            )
        out = self.tape.slice(self.cursor, count)
        self.cursor += count
        self.draws.append(count)
        return out


def ledger_draw(ledger: SeedLedger, count: int) -> BitString:
    return ledger.draw(count)


def inner_product_gf2(a: BitString, b: BitString) -> int:
    if a.length != b.length:
        raise LengthMismatch(f"lengths {a.length} and {b.length} differ")
    return parity(a.value & b.value)


# ---------------------------------------------------------------------------
# GF(2)[x] polynomial arithmetic on Python ints (bit i = coefficient of x^i)

_SPREAD = [int("".join(f"0{c}" for c in f"{b:08b}"), 2).to_bytes(2, "little") for b in range(256)]
_SPREAD16 = np.array([int.from_bytes(v, "little") for v in _SPREAD], dtype="<u2")


def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2)[x] polynomials."""
    if a.bit_length() < b.bit_length():
        a, b = b, a
    if b < 16:
        r = 0
        i = 0
        while b:
            if b & 1:
                r ^= a << i
            b >>= 1
            i += 1
        return r
    a2 = a << 1
    a4 = a << 2
    a8 = a << 3
    tab = [0, a, a2, a2 ^ a, a4, a4 ^ a, a4 ^ a2, a4 ^ a2 ^ a]
    tab += [a8 ^ v for v in tab]
    r = 0
    shift = 0
    while b:
        r ^= tab[b & 15] << shift
        b >>= 4
        shift += 4
    return r


def clsquare(a: int) -> int:
    """Square in GF(2)[x]: spread the bits of ``a`` to even positions."""
    if a < 256:
        return int.from_bytes(_SPREAD[a], "little")
    data = np.frombuffer(a.to_bytes((a.bit_length() + 7) // 8, "little"), dtype=np.uint8)
    return int.from_bytes(_SPREAD16[data].tobytes(), "little")


def poly_mod(a: int, p: int) -> int:
    dp = p.bit_length() - 1
    while a.bit_length() - 1 >= dp:
        a ^= p << (a.bit_length() - 1 - dp)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _fold(v: int, w: int, low: tuple[int, ...]) -> int:
    mask = (1 << w) - 1
    while v >> w:
        hi = v >> w
        v &= mask
        for e in low:
            v ^= hi << e
    return v


def is_irreducible(p: int) -> bool:
    """Rabin's irreducibility test over GF(2)."""
    w = p.bit_length() - 1
    if w < 1:
        return False
    if w == 1:
        return True
    if not p & 1:
        return False
    low = tuple(i for i in range(w) if (p >> i) & 1)
    x = 2
    # Cheap rejection of polynomials with a factor of degree <= 16: one gcd
    # against the product of (x^(2^i) - x) mod p.
    v = x
    acc = 1
    for _ in range(min(w // 2, 16)):
        v = _fold(clsquare(v), w, low)
        acc = _fold(clmul(acc, v ^ x), w, low)
    if acc == 0 or poly_gcd(p, acc) != 1:
        return False
    frob = {}
    v = x
    for i in range(1, w + 1):
        v = _fold(clsquare(v), w, low)
        frob[i] = v
    if frob[w] != x:
        return False
    for q in _prime_factors(w):
        if poly_gcd(p, frob[w // q] ^ x) != 1:
            return False
    return True


# Low-weight irreducible moduli: lowest-index trinomial x^w + x^a + 1 when one
# exists, else the lexicographically smallest pentanomial x^w + x^a + x^b + x^c + 1.
_MODULUS_TABLE: dict[int, tuple[int, ...]] = {
    1: (), 2: (1,), 3: (1,), 4: (1,), 5: (2,), 6: (1,), 7: (1,), 8: (4, 3, 1),
    9: (1,), 10: (3,), 11: (2,), 12: (3,), 13: (4, 3, 1), 14: (5,), 15: (1,),
    16: (5, 3, 1), 17: (3,), 18: (3,), 19: (5, 2, 1), 20: (3,), 21: (2,),
    22: (1,), 23: (5,), 24: (4, 3, 1), 25: (3,), 26: (4, 3, 1), 27: (5, 2, 1),
    28: (1,), 29: (2,), 30: (1,), 31: (3,), 32: (7, 3, 2), 33: (10,), 34: (7,),
    35: (2,), 36: (9,), 37: (6, 4, 1), 38: (6, 5, 1), 39: (4,), 40: (5, 4, 3),
    41: (3,), 42: (7,), 43: (6, 4, 3), 44: (5,), 45: (4, 3, 1), 46: (1,),
    47: (5,), 48: (5, 3, 2), 49: (9,), 50: (4, 3, 2), 51: (6, 3, 1), 52: (3,),
    53: (6, 2, 1), 54: (9,), 55: (7,), 56: (7, 4, 2), 57: (4,), 58: (19,),
    59: (7, 4, 2), 60: (1,), 61: (5, 2, 1), 62: (29,), 63: (1,), 64: (4, 3, 1),
}


def _poly_from_exponents(w: int, mids: tuple[int, ...]) -> int:
    p = (1 << w) | 1
    for e in mids:
        p |= 1 << e
    return p


def _swan_reducible(n: int, a: int) -> bool:
    """Swan's parity criterion: True when x^n + x^a + 1 is certainly reducible."""
    if n % 2 == 0 and a % 2 == 0:
        return True
    if n % 2 == 0:
        return n != 2 * a and (n * a // 2) % 4 in (0, 1)
    if a % 2:
        # x^n + x^a + 1 and its reciprocal x^n + x^(n-a) + 1 factor alike.
        a = n - a
    if (2 * n) % a:
        return n % 8 in (3, 5)
    return n % 8 in (1, 7)


@lru_cache(maxsize=None)
def modulus_exponents(w: int) -> tuple[int, ...]:
    """Middle exponents of the fixed modulus of degree ``w``."""
    if w < 1:
        raise SpecInvalid(f"field degree must be >= 1, got {w}")
    if w in _MODULUS_TABLE:
        return _MODULUS_TABLE[w]
    for a in range(1, w):
        if _swan_reducible(w, a):
            continue
        if is_irreducible(_poly_from_exponents(w, (a,))):
            return (a,)
    for a in range(3, w):
        for b in range(2, a):
            for c in range(1, b):
                if is_irreducible(_poly_from_exponents(w, (a, b, c))):
                    return (a, b, c)
    raise SpecInvalid(f"no trinomial or pentanomial modulus of degree {w}")  # pragma: no cover


@lru_cache(maxsize=None)
def irreducible_modulus(w: int) -> int:
    mids = modulus_exponents(w)
    return _poly_from_exponents(w, mids) if w > 1 else 0b11


@lru_cache(maxsize=None)
def _low_exponents(w: int) -> tuple[int, ...]:
    p = irreducible_modulus(w)
    return tuple(i for i in range(w) if (p >> i) & 1)


def gf_mul(a: int, b: int, w: int) -> int:
    """Product of two w-bit field elements under the fixed degree-w modulus."""
    return _fold(clmul(a, b), w, _low_exponents(w))


def gf_pow(a: int, e: int, w: int) -> int:
    low = _low_exponents(w)
    result = 1
    base = a
    while e:
        if e & 1:
            result = _fold(clmul(result, base), w, low)
        e >>= 1
        if e:
            base = _fold(clsquare(base), w, low)
    return result


class Multiplier:
    """Repeated multiplication by one fixed element of GF(2^w)."""

    def __init__(self, x: int, w: int):
        self.w = w
        self.low = _low_exponents(w)
        x2 = x << 1
        x4 = x << 2
        x8 = x << 3
        tab = [0, x, x2, x2 ^ x, x4, x4 ^ x, x4 ^ x2, x4 ^ x2 ^ x]
        self.tab = tab + [x8 ^ v for v in tab]

    def __call__(self, v: int) -> int:
        tab = self.tab
        r = 0
        shift = 0
        while v:
            r ^= tab[v & 15] << shift
            v >>= 4
            shift += 4
        return _fold(r, self.w, self.low)


@dataclass(frozen=True)
class FieldElement:
    value: int
    w: int

    def __post_init__(self):
        if self.w < 1:
            raise SpecInvalid("field degree must be >= 1")
        if self.value < 0 or self.value >> self.w:
            raise ValueError(f"value does not fit in {self.w} bits")

    @property
    def modulus(self) -> int:
        return irreducible_modulus(self.w)

    def __add__(self, other: "FieldElement") -> "FieldElement":
        if other.w != self.w:
            raise DegreeMismatch(f"GF(2^{self.w}) vs GF(2^{other.w})")
        return FieldElement(self.value ^ other.value, self.w)

    __sub__ = __add__

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return gf2w_mul(self, other)

    def __pow__(self, e: int) -> "FieldElement":
        return FieldElement(gf_pow(self.value, e, self.w), self.w)


def gf2w_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    if a.w != b.w:
        raise DegreeMismatch(f"GF(2^{a.w}) vs GF(2^{b.w})")
    return FieldElement(gf_mul(a.value, b.value, a.w), a.w)


def ceil_log2(x) -> int:
    """Smallest integer k with 2**k >= x, for a positive rational x."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("ceil_log2 needs a positive argument")
    p, q = x.numerator, x.denominator

    def covers(k: int) -> bool:
        return (q << k) >= p if k >= 0 else q >= (p << -k)

    k = p.bit_length() - q.bit_length()
    while not covers(k):
        k += 1
    while covers(k - 1):
        k -= 1
    return k


def _verify_small_moduli() -> None:
    for w in range(1, 17):
        if not is_irreducible(irreducible_modulus(w)):
            raise RuntimeError(f"modulus table entry for degree {w} is reducible")


_verify_small_moduli()
