from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from sampler_forge.compose import strong_compose
from sampler_forge.errors import BadP, BudgetExceeded, NotStrong, SpecInvalid
from sampler_forge.generators import ExactKWiseGenerator
from sampler_forge.matrix import entry_lift, matrix_ellwise_plan, matrix_ellwise_sampler
from sampler_forge.samplers import full_independence_sampler, hash_outer_sampler, pairwise_sampler
from sampler_forge.verify import (
    TestFunctionFamily,
    concentration_check,
    failure_rate,
    matrix_failure_rate,
    mz_constant,
    mz_oracle,
    randomness_audit,
    strong_failure_rate,
    wilson_interval,
)

from oracles import rademacher_abs_moment

F = Fraction


def _brute_failures(s, row: np.ndarray, scale: int, eps: Fraction) -> int:
    """Count seeds with |mean f(Z_i) - E f| > eps using Fractions only."""
    N = len(row)
    mean = F(int(row.sum()), N * scale)
    fails = 0
    for seed in range(1 << s.n):
        pts = s.points(seed)
        emp = F(sum(int(row[int(p)]) for p in pts), s.t * scale)
        fails += abs(emp - mean) > eps
    return fails


@pytest.mark.parametrize("kind", ["random_balanced", "random_bounded_real", "hamming_threshold"])
def test_exhaustive_counts_match_brute_force(kind, backend):
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    fam = TestFunctionFamily(kind, 2, count=3, prng_seed=7)
    rep = failure_rate(s, fam, eps=F(1, 8))
    want = [_brute_failures(s, row, fam.scale, F(1, 8)) for row in fam.tables()]
    assert rep.failures == want
    assert rep.trials == 1 << s.n


def test_constant_function_rate_zero():
    s = hash_outer_sampler(2, F(1, 4), F(1, 2))
    fam = TestFunctionFamily("random_balanced", 2, count=2)
    fam._tables = np.array([[1, 1, 1, 1], [0, 0, 0, 0]], dtype=np.int64)
    rep = failure_rate(s, fam, eps=F(1, 1000))
    assert rep.failures == [0, 0] and rep.passed


def test_full_independence_tiny_exhaustive():
    s = full_independence_sampler(2, F(1, 4), F(1, 2))
    for kind in ("random_balanced", "sparse_indicator", "dictator"):
        rep = failure_rate(s, TestFunctionFamily(kind, 2, prng_seed=1))
        assert rep.passed, kind


def test_exhaustive_is_bit_identical_and_mc_reproducible():
    s = pairwise_sampler(3, F(1, 8), F(1, 2))
    fam = TestFunctionFamily("sparse_indicator", 3, count=4)
    a, b = failure_rate(s, fam), failure_rate(s, fam)
    assert a.failures == b.failures and a.rates == b.rates
    c = failure_rate(s, fam, mode="monte_carlo", trials=500, prng_seed=4)
    d = failure_rate(s, fam, mode="monte_carlo", trials=500, prng_seed=4)
    assert c.failures == d.failures and c.to_csv() == d.to_csv()


def test_budget_and_mode_errors():
    s = pairwise_sampler(6, 0.1, 0.25)
    fam = TestFunctionFamily("random_balanced", 6, count=1)
    with pytest.raises(BudgetExceeded):
        failure_rate(s, fam, budget=1 << 10)
    with pytest.raises(SpecInvalid):
        failure_rate(s, fam, mode="monte_carlo")
    with pytest.raises(SpecInvalid):
        failure_rate(s, fam, mode="sideways")
    with pytest.raises(SpecInvalid):
        failure_rate(s, TestFunctionFamily("random_balanced", 5, count=1))
    with pytest.raises(SpecInvalid):
        TestFunctionFamily("nonsense", 2)
    with pytest.raises(BudgetExceeded):
        TestFunctionFamily("random_balanced", 30)


def test_family_invariants():
    fam = TestFunctionFamily("sparse_indicator", 6, count=5)
    assert (fam.tables().sum(axis=1) == 8).all()
    bal = TestFunctionFamily("random_balanced", 6, count=5)
    assert (bal.totals() == 32).all()
    real = TestFunctionFamily("random_bounded_real", 4, count=2)
    assert 0 <= real.max_norm() <= 1
    for kind in ("rank1_projector", "random_hermitian", "dilated_contraction"):
        mf = TestFunctionFamily(kind, 3, count=2, params={"d": 2})
        tab = mf.tables()
        assert np.allclose(tab, np.swapaxes(tab.conj(), -1, -2))
        assert mf.max_norm() <= 1 + 1e-9
    assert TestFunctionFamily("dilated_contraction", 2, params={"d": 2}).dim == 4
    again = TestFunctionFamily.from_dict(json.loads(json.dumps(fam.to_dict())))
    assert np.array_equal(again.tables(), fam.tables())


def test_strong_all_equal_reduces_to_failure_rate(backend):
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    fam = TestFunctionFamily("random_balanced", 2, count=1, prng_seed=3)
    seq = TestFunctionFamily("random_balanced", 2, count=s.t)
    seq._tables = np.repeat(fam.tables(), s.t, axis=0)
    eps = F(1, 8)
    assert strong_failure_rate(s, seq, eps=eps).failures == failure_rate(s, fam, eps=eps).failures


def test_strong_constant_sequence_zero():
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    seq = TestFunctionFamily("random_balanced", 2, count=s.t)
    rng = np.random.Generator(np.random.Philox(0))
    seq._tables = np.repeat(rng.integers(0, 2, size=(s.t, 1)), 4, axis=1)
    assert strong_failure_rate(s, seq, eps=F(1, 100)).failures == [0]


def test_strong_dictator_sequence_exact_pairwise():
    gen_t, m = 16, 2
    s = pairwise_sampler(m, F(1, 4), F(1, 2), t=gen_t)
    seq = TestFunctionFamily("dictator", m, count=gen_t, prng_seed=2)
    rep = strong_failure_rate(s, seq)
    assert rep.passed


def test_strong_requires_strong_and_t_functions():
    with pytest.raises(NotStrong):
        strong_failure_rate(hash_outer_sampler(2, F(1, 4), F(1, 2)), TestFunctionFamily("dictator", 2))
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    with pytest.raises(SpecInvalid):
        strong_failure_rate(s, TestFunctionFamily("dictator", 2, count=3))


def test_matrix_d1_agrees_with_scalar(backend):
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    for kind in ("random_balanced", "random_bounded_real"):
        fam = TestFunctionFamily(kind, 2, count=3, prng_seed=5)
        scalar = failure_rate(s, fam, eps=F(1, 8))
        lifted = entry_lift(s, 1)
        matrix = matrix_failure_rate(lifted, fam, mode="exhaustive", eps=F(1, 8))
        assert matrix.failures == scalar.failures


def test_matrix_constant_family_zero():
    ms = matrix_ellwise_sampler(matrix_ellwise_plan(3, 2, F(1, 4), F(1, 2), 4))
    fam = TestFunctionFamily("random_hermitian", 3, count=1, params={"d": 2})
    fam._tables = np.broadcast_to(np.diag([0.5, -0.25]).astype(complex), (1, 8, 2, 2)).copy()
    assert matrix_failure_rate(ms, fam, trials=200, eps=F(1, 1000)).failures == [0]


def test_wilson_interval_contains_rate():
    lo, hi = wilson_interval(3, 1000)
    assert lo < 0.003 < hi
    assert wilson_interval(0, 100)[0] == 0.0


def test_report_rows_and_csv():
    s = pairwise_sampler(2, F(1, 4), F(1, 2), t=16)
    rep = failure_rate(s, TestFunctionFamily("dictator", 2, count=2))
    header = rep.to_csv().splitlines()[0]
    assert header == "function_id,failures,trials,rate,wilson_hi"
    d = rep.to_dict()
    assert d["verdict"] in ("battery-pass", "battery-fail")
    json.dumps(d)


def test_concentration_vacuous_exact_pairwise():
    gen = ExactKWiseGenerator(8, 1, 2)
    rep = concentration_check(8, 1, 2, 0, F(1, 2), gen, TestFunctionFamily("random_balanced", 1))
    assert rep["terms"] == ["25", "0"] and rep["vacuous"] and rep["pass"]


def test_concentration_nontrivial_bound():
    gen = ExactKWiseGenerator(256, 1, 2)
    fam = TestFunctionFamily("random_bounded_real", 1, count=5)
    rep = concentration_check(256, 1, 2, 0, F(1, 2), gen, fam)
    assert not rep["vacuous"] and F(rep["bound"]) == F(200, 256)
    assert rep["pass"]


def test_concentration_shape_check():
    with pytest.raises(SpecInvalid):
        concentration_check(8, 2, 2, 0, F(1, 2), ExactKWiseGenerator(8, 1, 2))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_mz_exact_moments(n):
    rep = mz_oracle(4, n, trials=2000)
    assert F(rep["exact"]) == rademacher_abs_moment(n, 4)
    assert float(F(rep["exact"])) <= rep["rhs"] and rep["pass"]
    assert rep["C"] == pytest.approx((3 * 2**0.5) ** 4 * 4**2)


def test_mz_known_values():
    assert F(mz_oracle(4, 3, trials=10)["exact"]) == 21
    assert F(mz_oracle(2, 6, trials=10)["exact"]) == 6
    assert mz_constant(2) == pytest.approx(36)
    assert mz_oracle(4, 4, trials=5000, variables="uniform")["pass"]
    with pytest.raises(BadP):
        mz_oracle(3, 2)
    with pytest.raises(BadP):
        mz_oracle(0, 2)


def test_audit_base_and_composed():
    base = pairwise_sampler(4, F(1, 8), F(1, 2))
    assert randomness_audit(base).passed
    outer = hash_outer_sampler(1, F(1, 4), F(1, 2))
    inner = pairwise_sampler(4, F(1, 4), F(3, 8), t=8)
    c = strong_compose(outer, inner)
    res = randomness_audit(c)
    assert res.passed and res.cursor == outer.n + inner.n
    assert sum(res.draws) == c.n and res.points_checked == c.t


def test_audit_fault_injection():
    s = pairwise_sampler(4, F(1, 8), F(1, 2))
    short = randomness_audit(s, tape_bits=s.n - 1)
    assert not short.passed and short.error
    long = randomness_audit(s, tape_bits=s.n + 5)
    assert long.passed and long.cursor == s.n
