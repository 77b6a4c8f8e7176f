from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from sampler_forge.bitcore import BitString
from sampler_forge.derive import (
    CodeSpec,
    ExtractorSpec,
    binary_code_sampler,
    extractor_adversarial_distance,
    extractor_distance_profile,
    list_size_at,
    sampler_to_code,
    sampler_to_extractor,
    statistical_distance,
)
from sampler_forge.errors import (
    BadRadius,
    BudgetExceeded,
    DomainNotBinary,
    IndexOutOfRange,
    NotNormalized,
    NotStrong,
)
from sampler_forge.samplers import declared_sampler, hash_outer_sampler, pairwise_sampler

from oracles import exact_tv

F = Fraction


def test_statistical_distance_examples():
    u = np.full(4, 0.25)
    assert statistical_distance(u, u) == 0
    assert statistical_distance([1, 0], [0.5, 0.5]) == 0.5
    assert statistical_distance([1, 0, 0, 0], [0, 0.5, 0.5, 0]) == 1
    with pytest.raises(NotNormalized):
        statistical_distance([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(NotNormalized):
        statistical_distance([1.5, -0.5], [0.5, 0.5])


def test_statistical_distance_matches_exact_oracle():
    rng = np.random.Generator(np.random.Philox(2))
    a = rng.integers(0, 50, 16)
    b = rng.integers(0, 50, 16)
    p = [F(int(x), int(a.sum())) for x in a]
    q = [F(int(x), int(b.sum())) for x in b]
    got = statistical_distance(a / a.sum(), b / b.sum())
    assert got == pytest.approx(float(exact_tv(dict(enumerate(p)), dict(enumerate(q)))), abs=1e-12)


def test_extractor_spec_formula():
    spec = ExtractorSpec.from_sampler_spec(declared_sampler(4, 256, 20, F(1, 1024), F(1, 8)))
    assert (spec.k, spec.err, spec.d, spec.n) == (13, F(1, 4), 8, 20)
    spec = ExtractorSpec.from_sampler_spec(declared_sampler(2, 32, 14, F(1, 64), F(1, 4)))
    assert (spec.k, spec.err) == (10, F(1, 2))


def test_extractor_is_sample_map(backend):
    s = pairwise_sampler(2, F(1, 8), F(1, 4), t=32)
    spec, ext = sampler_to_extractor(s)
    x = BitString(0x2B5, s.n)
    pts = s.sample(x).points
    for y in (0, 7, 31):
        assert ext(x, y).value == int(pts[y])
    with pytest.raises(IndexOutOfRange):
        ext(x, 32)


def test_extractor_requires_strong():
    with pytest.raises(NotStrong):
        sampler_to_extractor(hash_outer_sampler(2, F(1, 4), F(1, 2)))


def test_full_source_exact_distance(backend):
    s = pairwise_sampler(2, F(1, 8), F(1, 4), t=32)
    spec, ext = sampler_to_extractor(s)
    dist = extractor_adversarial_distance(ext, spec.n)
    # Oracle: joint distribution of (Ext(X, Y), Y) for uniform X, Y.
    table = ext.table()
    joint = np.zeros((spec.t, 1 << spec.m), dtype=np.int64)
    for y in range(spec.t):
        joint[y] = np.bincount(table[:, y].astype(np.int64), minlength=1 << spec.m)
    total = joint.sum()
    p = [F(int(c), int(total)) for c in joint.ravel()]
    q = [F(1, joint.size)] * joint.size
    assert dist == pytest.approx(float(exact_tv(dict(enumerate(p)), dict(enumerate(q)))), abs=1e-12)
    assert dist <= spec.err


def test_profile_monotone(backend):
    s = pairwise_sampler(2, F(1, 8), F(1, 4), t=32)
    spec, ext = sampler_to_extractor(s)
    prof = extractor_distance_profile(ext, [5, 7, 9], restarts=20, max_steps=8)
    vals = [prof[k] for k in sorted(prof)]
    assert vals == sorted(vals, reverse=True)
    assert max(vals) <= spec.err


def test_adversarial_budget():
    s = pairwise_sampler(4, F(1, 1024), F(1, 8))
    _, ext = sampler_to_extractor(s)
    with pytest.raises(BudgetExceeded):
        extractor_adversarial_distance(ext, 10)


def test_code_spec_formula():
    spec = CodeSpec.from_sampler_spec(declared_sampler(1, 4800, 12, F(1, 256), F(1, 4)))
    assert spec.rate == F(1, 400)
    assert spec.rho == F(1, 4) and spec.radius == 1200
    assert spec.L_bound == 16


def test_code_requires_binary_domain():
    with pytest.raises(DomainNotBinary):
        sampler_to_code(pairwise_sampler(2, F(1, 4), F(1, 2)))


def test_list_size_extremes_and_errors(backend):
    s = pairwise_sampler(1, F(1, 4), F(1, 4))
    spec, code = sampler_to_code(s)
    recv = BitString(0, spec.t)
    assert list_size_at(code, recv, spec.t) == 1 << spec.n
    assert list_size_at(code, code.encode(BitString(9, spec.n)), 0) >= 1
    with pytest.raises(BadRadius):
        list_size_at(code, recv, -1)


def test_list_size_matches_brute_force(backend):
    s = pairwise_sampler(1, F(1, 4), F(1, 4))
    spec, code = sampler_to_code(s)
    rng = np.random.Generator(np.random.Philox(11))
    words = [code.encode(BitString(x, spec.n)).value for x in range(1 << spec.n)]
    for _ in range(5):
        r = int.from_bytes(rng.bytes((spec.t + 7) // 8), "little") & ((1 << spec.t) - 1)
        want = sum((w ^ r).bit_count() <= spec.radius for w in words)
        assert list_size_at(code, BitString(r, spec.t), spec.radius) == want


def test_list_size_budget():
    s = declared_sampler(1, 64, 21, F(1, 4), F(1, 4))
    from sampler_forge.derive import Code

    with pytest.raises(BudgetExceeded):
        list_size_at(Code(CodeSpec.from_sampler_spec(s), None), BitString(0, 64), 3)


def test_binary_code_sampler_ellwise_branch():
    s = binary_code_sampler(F(1, 256), F(1, 4), 1)
    assert s.spec.kind == "ellwise" and s.m == 1
    assert s.spec.params["s"] == 4
    # t = O(eps^-(2+alpha) log(1/delta)); the planner constant is 50 / log2 s.
    ref = 50 * 4**3 * math.log2(2 * 256) / math.log2(4)
    assert ref <= s.t <= 2 * ref


def test_binary_code_sampler_pairwise_branch():
    s = binary_code_sampler(F(1, 4), F(1, 4), 2)
    assert s.spec.kind == "pairwise"
    assert (s.t, s.n) == (64, 12)
