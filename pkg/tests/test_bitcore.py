from __future__ import annotations

from fractions import Fraction

import pytest

from sampler_forge.bitcore import (
    BitString,
    FieldElement,
    SeedLedger,
    ceil_log2,
    clmul,
    clsquare,
    gf2w_mul,
    gf_pow,
    inner_product_gf2,
    irreducible_modulus,
    is_irreducible,
    ledger_draw,
    modulus_exponents,
)
from sampler_forge.errors import DegreeMismatch, LengthMismatch, TapeExhausted

from oracles import brute_irreducible, naive_clmul, naive_gf_mul


def test_ledger_prefix_read():
    ledger = SeedLedger(BitString.from_str("101101"))
    assert str(ledger_draw(ledger, 3)) == "101"
    assert ledger.cursor == 3


def test_ledger_zero_draw_at_end():
    ledger = SeedLedger(BitString.from_str("101101"), cursor=6)
    out = ledger_draw(ledger, 0)
    assert out.length == 0 and ledger.cursor == 6


def test_ledger_overrun():
    ledger = SeedLedger(BitString.from_str("101101"), cursor=5)
    with pytest.raises(TapeExhausted):
        ledger_draw(ledger, 2)
    assert ledger.cursor == 5


def test_ledger_draws_are_sequential():
    tape = BitString.from_str("110010111")
    ledger = SeedLedger(tape)
    parts = [ledger.draw(c) for c in (2, 3, 4)]
    assert "".join(str(p) for p in parts) == str(tape)
    assert ledger.draws == [2, 3, 4]


def test_bitstring_bytes_round_trip():
    b = BitString.from_str("1011000111")
    assert BitString.from_bytes(b.to_bytes(), b.length) == b
    assert b.to_bytes() == bytes([0b10001101, 0b11])


def test_gf_mul_examples():
    w = 3
    x = FieldElement(0b010, w)
    one = FieldElement(1, w)
    assert gf2w_mul(one, x) == x
    assert irreducible_modulus(3) == 0b1011
    assert gf2w_mul(FieldElement(0b100, w), x).value == 0b011
    assert gf2w_mul(FieldElement(0, w), FieldElement(0b111, w)).value == 0


def test_gf_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        gf2w_mul(FieldElement(1, 3), FieldElement(1, 4))


@pytest.mark.parametrize("w", range(1, 9))
def test_field_axioms_exhaustive(w):
    elems = [FieldElement(v, w) for v in range(1 << w)]
    one = FieldElement(1, w)
    for a in elems:
        assert a * one == a
        if a.value:
            # Every nonzero element is invertible: a^(2^w - 1) = 1.
            assert a ** ((1 << w) - 1) == one
    step = max(1, (1 << w) // 16)
    sample = elems[::step]
    for a in sample:
        for b in sample:
            assert a * b == b * a
            for c in sample:
                assert (a * b) * c == a * (b * c)
                assert a * (b + c) == a * b + a * c


def test_inner_product_examples():
    assert inner_product_gf2(BitString.from_str("1010"), BitString.from_str("1010")) == 0
    assert inner_product_gf2(BitString.from_str("111"), BitString.from_str("100")) == 1
    assert inner_product_gf2(BitString.from_str("0000"), BitString.from_str("1111")) == 0
    with pytest.raises(LengthMismatch):
        inner_product_gf2(BitString.from_str("1"), BitString.from_str("10"))


@pytest.mark.parametrize("w", range(1, 17))
def test_modulus_table_irreducible_by_trial_division(w):
    p = irreducible_modulus(w)
    assert p.bit_length() - 1 == w
    assert brute_irreducible(p)


@pytest.mark.parametrize("w", [17, 31, 32, 63, 64, 89, 127, 200, 521])
def test_large_moduli_irreducible(w):
    assert is_irreducible(irreducible_modulus(w))


def test_irreducibility_test_matches_brute_force():
    for p in range(2, 1 << 11):
        assert is_irreducible(p) == brute_irreducible(p), bin(p)


def test_modulus_search_for_degrees_without_trinomials():
    # x^8 has no irreducible trinomial, so the table holds a pentanomial.
    assert len(modulus_exponents(8)) == 3
    assert is_irreducible(irreducible_modulus(1024))


def test_clmul_and_square_match_naive():
    import random

    rng = random.Random(7)
    for _ in range(200):
        a, b = rng.getrandbits(rng.randint(1, 300)), rng.getrandbits(rng.randint(1, 300))
        assert clmul(a, b) == naive_clmul(a, b)
        assert clsquare(a) == naive_clmul(a, a)


def test_gf_pow_matches_repeated_multiplication():
    w = 13
    poly = irreducible_modulus(w)
    a = 0x1ABC
    acc = 1
    for e in range(40):
        assert gf_pow(a, e, w) == acc
        acc = naive_gf_mul(acc, a, poly)


@pytest.mark.parametrize(
    "x,expected",
    [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (Fraction(1, 2), -1), (Fraction(3, 4), 0), (Fraction(1, 3), -1), (4800, 13)],
)
def test_ceil_log2(x, expected):
    assert ceil_log2(x) == expected
