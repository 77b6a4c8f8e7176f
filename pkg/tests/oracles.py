"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def naive_clmul(a: int, b: int) -> int:
    r = 0
    for i in range(b.bit_length()):
        if (b >> i) & 1:
            r ^= a << i
    return r


def naive_mod(a: int, p: int) -> int:
    dp = p.bit_length() - 1
    for i in range(a.bit_length() - 1, dp - 1, -1):
        if (a >> i) & 1:
            a ^= p << (i - dp)
    return a


def naive_gf_mul(a: int, b: int, poly: int) -> int:
    return naive_mod(naive_clmul(a, b), poly)


def brute_irreducible(p: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    w = p.bit_length() - 1
    if w < 1:
        return False
    for q in range(2, 1 << (w // 2 + 1)):
        if naive_mod(p, q) == 0:
            return False
    return True


def naive_small_bias_bits(x: int, y: int, k: int, poly: int, N: int) -> list[int]:
    out = []
    cur = x
    for _ in range(N):
        out.append(bin(cur & y).count("1") & 1)
        cur = naive_gf_mul(cur, x, poly)
    return out


def naive_toeplitz(x: int, y: int, n_x: int, m: int) -> int:
    """Row r of the Toeplitz matrix keyed by y dotted with the source x."""
    out = 0
    for r in range(m):
        bit = 0
        for c in range(n_x):
            bit ^= ((x >> c) & 1) & ((y >> (r + n_x - 1 - c)) & 1)
        out |= bit << r
    return out


def naive_poly_eval(coeffs: list[int], alpha: int, poly: int) -> int:
    acc = 0
    power = 1
    for c in coeffs:
        acc ^= naive_gf_mul(c, power, poly)
        power = naive_gf_mul(power, alpha, poly)
    return acc


def exact_tv(p: dict, q: dict) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys), Fraction(0)) / 2


def max_linear_test_bias(streams: list[list[int]]) -> Fraction:
    """Max over nonzero tests T of |Pr[<T, z> = 0] - Pr[<T, z> = 1]|."""
    N = len(streams[0])
    best = Fraction(0)
    for T in range(1, 1 << N):
        s = sum(1 - 2 * (sum(z[i] for i in range(N) if (T >> i) & 1) & 1) for z in streams)
        best = max(best, abs(Fraction(s, len(streams))))
    return best


def hoeffding_t(delta: float, eps: float) -> int:
    return math.ceil(math.log(2 / delta) / (2 * eps * eps))


def rademacher_abs_moment(n: int, p: int) -> Fraction:
    total = sum(abs(sum(signs)) ** p for signs in itertools.product((-1, 1), repeat=n))
    return Fraction(total, 2**n)


def svd_norm(A) -> float:
    return float(np.linalg.svd(np.asarray(A), compute_uv=False)[0])
