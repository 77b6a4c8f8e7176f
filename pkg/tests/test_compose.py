from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from sampler_forge.bitcore import BitString, SeedLedger
from sampler_forge.compose import (
    iterate_matrix,
    iteration_rounds,
    low_randomness_s,
    matrix_compose,
    preset_low_randomness,
    preset_optimal_samples,
    reduction_build,
    seed_compose,
    strong_compose,
)
from sampler_forge.errors import AlphaInfeasible, DomainMismatch, InnerNotStrong, SpecInvalid
from sampler_forge.matrix import entry_lift, matrix_ellwise_plan, matrix_ellwise_sampler
from sampler_forge.samplers import (
    check_provenance,
    full_independence_sampler,
    hash_outer_sampler,
    pairwise_sampler,
)
from sampler_forge.verify import TestFunctionFamily, failure_rate, randomness_audit

F = Fraction


@pytest.fixture(scope="module")
def tiny_pair():
    outer = hash_outer_sampler(1, F(1, 4), F(1, 2))
    inner = pairwise_sampler(4, F(1, 4), F(3, 8), t=8)
    return outer, inner


def test_strong_compose_arithmetic(tiny_pair):
    outer, inner = tiny_pair
    assert outer.t == 16 and inner.t == 8
    c = strong_compose(outer, inner)
    assert (c.delta, c.eps, c.n, c.t) == (outer.delta + inner.delta, outer.eps + inner.eps, outer.n + inner.n, inner.t)
    assert (c.delta, c.eps, c.n, c.t) == (F(1, 2), F(7, 8), 12, 8)
    assert check_provenance(c.spec)


def test_strong_compose_points_are_outer_at_inner_indices(tiny_pair, backend):
    outer, inner = tiny_pair
    c = strong_compose(outer, inner)
    x1, x2 = 0b1011, 0b10010111
    idx = inner.points(x2).astype(np.int64)
    assert np.array_equal(c.points(x1 | (x2 << outer.n)), outer.points(x1)[idx])


def test_strong_compose_exhaustive_and_audit(tiny_pair, backend):
    c = strong_compose(*tiny_pair)
    for kind in ("random_balanced", "sparse_indicator"):
        assert failure_rate(c, TestFunctionFamily(kind, 1, prng_seed=3)).max_rate <= c.delta
    audit = randomness_audit(c)
    assert audit.passed and audit.cursor == c.n == 12


def test_strong_compose_rejections(tiny_pair):
    outer, inner = tiny_pair
    with pytest.raises(InnerNotStrong):
        strong_compose(outer, hash_outer_sampler(4, F(1, 4), F(1, 2)))
    with pytest.raises(DomainMismatch):
        strong_compose(outer, pairwise_sampler(5, F(1, 4), F(1, 2)))
    with pytest.raises(DomainMismatch):
        strong_compose(full_independence_sampler(2, F(1, 4), F(1, 2)), inner)
    lifted = entry_lift(pairwise_sampler(4, F(1, 4), F(1, 2), t=16), 2)
    with pytest.raises(SpecInvalid):
        strong_compose(lifted, inner)


def test_seed_compose_arithmetic_and_exhaustive(backend):
    outer = pairwise_sampler(4, F(25, 256), F(2, 5), t=16)
    inner = pairwise_sampler(outer.n, F(1, 36), F(3, 16), t=256)
    c = seed_compose(outer, inner)
    want_eps = 2 * outer.delta + 2 * inner.eps + outer.eps
    assert (c.delta, c.eps, c.n, c.t) == (inner.delta, want_eps, inner.n, outer.t * inner.t)
    assert want_eps == F(621, 640) and check_provenance(c.spec)
    rep = failure_rate(c, TestFunctionFamily("random_balanced", 4, count=3, prng_seed=1))
    assert rep.max_rate <= c.delta


def test_seed_compose_points_row_major(backend):
    outer = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    inner = pairwise_sampler(outer.n, F(1, 4), F(1, 2), t=16)
    c = seed_compose(outer, inner)
    z = 0x2D7
    us = inner.points(z)
    want = np.concatenate([outer.points(int(u)) for u in us])
    assert np.array_equal(c.points(z), want)


def test_seed_compose_domain_mismatch():
    outer = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    with pytest.raises(DomainMismatch):
        seed_compose(outer, pairwise_sampler(outer.n + 1, F(1, 4), F(1, 2)))


def test_ledger_consumes_n1_plus_n2(tiny_pair):
    c = strong_compose(*tiny_pair)
    ledger = SeedLedger(BitString(0xABC, c.n))
    c.draw(ledger)
    assert ledger.cursor == c.n


def test_low_randomness_s_values():
    assert low_randomness_s(F(1, 2**16), F(1, 4), F(1, 2)) == 16
    assert low_randomness_s(F(1, 4), F(1, 2), F(1, 100)) == 2
    assert low_randomness_s(F(1, 4), F(1, 1024), 1) == 8
    with pytest.raises(SpecInvalid):
        low_randomness_s(F(1, 4), F(1, 2), 0)


def test_reduction_build_structure():
    s = reduction_build(8, F(1, 256), F(1, 4), 4)
    hash_child, inner_child = s.spec.children
    assert hash_child.kind == "hash" and (hash_child.delta, hash_child.eps) == (F(1, 512), F(1, 8))
    assert inner_child.m == hash_child.params["d"]
    assert s.delta == F(1, 256) and s.eps == F(1, 4) and check_provenance(s.spec)


@pytest.mark.parametrize("builder", [preset_low_randomness, preset_optimal_samples])
def test_presets_rederive(builder):
    s = builder(8, F(1, 256), F(1, 4))
    assert check_provenance(s.spec)
    assert (s.delta, s.eps) == (F(1, 256), F(1, 4))


def test_preset_tradeoff_direction():
    lo = preset_low_randomness(16, F(1, 2**16), F(1, 4))
    opt = preset_optimal_samples(16, F(1, 2**16), F(1, 4))
    assert opt.t < lo.t
    assert lo.n < opt.n


def test_iteration_rounds():
    assert [iteration_rounds(d) for d in (2, 4, 5, 16, 17, 256, 257)] == [1, 1, 2, 2, 3, 3, 4]
    with pytest.raises(SpecInvalid):
        iteration_rounds(1)


def test_iterate_matrix_single_round():
    s = iterate_matrix(4, 2, F(1, 4), F(1, 2))
    assert s.spec.params["rounds"] == 1 and s.spec.params["alphas"] == []
    assert s.spec.dim == 2 and check_provenance(s.spec)
    assert (s.delta, s.eps) == (F(1, 4), F(1, 2))


def test_iterate_matrix_two_rounds_budget():
    s = iterate_matrix(4, 16, F(1, 4), F(1, 2))
    assert s.spec.params["rounds"] == 2
    assert s.spec.params["alphas"] == ["1/8"]
    assert s.delta <= F(1, 4) and s.eps <= F(1, 2)
    assert check_provenance(s.spec)
    assert randomness_audit(s).cursor == s.n


def test_alpha_infeasible():
    from sampler_forge.compose import _choose_alpha

    with pytest.raises(AlphaInfeasible):
        _choose_alpha(1, F(1, 2), F(1, 2), 2)


def test_matrix_compose_checks():
    base = entry_lift(pairwise_sampler(4, F(1, 64), F(1, 8), t=2**12), 2)
    plan = matrix_ellwise_plan(12, 2, F(1, 8), F(1, 2), 4)
    c = matrix_compose(base, matrix_ellwise_sampler(plan))
    assert c.spec.dim == 2 and c.n == base.n + plan.n and c.t == plan.t
    assert check_provenance(c.spec)
    with pytest.raises(DomainMismatch):
        matrix_compose(base, matrix_ellwise_sampler(matrix_ellwise_plan(12, 4, F(1, 8), F(1, 2), 4)))
    with pytest.raises(SpecInvalid):
        matrix_compose(pairwise_sampler(4, F(1, 4), F(1, 2), t=16), matrix_ellwise_sampler(plan))
