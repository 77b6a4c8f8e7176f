from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from sampler_forge.bitcore import BitString
from sampler_forge.errors import BadQ, NoConvergence, SOutOfRange, SpecInvalid
from sampler_forge.matrix import (
    MatrixFn,
    empirical_matrix_mean,
    entry_lift,
    exact_rademacher_moment,
    hermitian_dilation,
    matrix_ellwise_plan,
    matrix_ellwise_sampler,
    matrix_from_json,
    matrix_to_json,
    random_contraction,
    random_hermitian_contraction,
    spectral_norm,
    spectral_norms,
    trace_moment_oracle,
)
from sampler_forge.samplers import check_provenance, pairwise_sampler
from sampler_forge.verify import TestFunctionFamily, matrix_failure_rate

from oracles import svd_norm

F = Fraction


def test_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1, rel=1e-12)
    assert spectral_norm(np.diag([3.0, 4.0])) == pytest.approx(4, rel=1e-12)
    assert spectral_norm([[0, 2], [0, 0]]) == pytest.approx(2, rel=1e-12)
    assert spectral_norm(np.zeros((2, 2))) == 0.0


def test_norm_rejects_bad_input():
    with pytest.raises(SpecInvalid):
        spectral_norm(np.ones((2, 3)))
    with pytest.raises(SpecInvalid):
        spectral_norm([[np.nan]])


def test_norm_no_convergence():
    # Two nearly equal top singular values make power iteration crawl.
    A = np.diag([1.0, 1.0 - 1e-9, 0.5])
    with pytest.raises(NoConvergence):
        spectral_norm(A, tol=1e-15, max_iter=3)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_norm_matches_svd_and_entry_bounds(d):
    rng = np.random.Generator(np.random.Philox(d))
    for _ in range(100):
        A = random_contraction(rng, d)
        nrm = spectral_norm(A)
        assert abs(nrm - svd_norm(A)) <= 1e-9 * max(1.0, nrm)
        r = np.abs(A).max()
        assert r <= nrm + 1e-12 and nrm <= d * r + 1e-12


def test_dilation_examples():
    H = hermitian_dilation([[1]])
    assert np.array_equal(H, np.array([[0, 1], [1, 0]], dtype=complex))
    rng = np.random.Generator(np.random.Philox(9))
    for d in (1, 3, 8):
        A = random_contraction(rng, d)
        H = hermitian_dilation(A)
        assert np.array_equal(H, H.conj().T)
        assert abs(spectral_norm(H) - spectral_norm(A)) <= 1e-9


def test_batch_norms_agree():
    rng = np.random.Generator(np.random.Philox(3))
    Hs = random_hermitian_contraction(rng, 3, (50,))
    ref = np.array([svd_norm(H) for H in Hs])
    assert np.allclose(spectral_norms(Hs, hermitian=True), ref, atol=1e-12)
    assert np.allclose(spectral_norms(Hs), ref, atol=1e-12)
    assert np.allclose(ref, 1.0)


def test_matrix_json_round_trip():
    A = np.array([[1 + 2j, -0.5], [0, 3j]])
    assert np.array_equal(matrix_from_json(matrix_to_json(A)), A)


def test_entry_lift_parameters():
    avg = pairwise_sampler(4, F(1, 1024), F(1, 64))
    lifted = entry_lift(avg, 2)
    assert (lifted.delta, lifted.eps) == (F(1, 128), F(1, 16))
    one = entry_lift(avg, 1)
    assert (one.delta, one.eps) == (2 * avg.delta, 2 * avg.eps)
    assert lifted.spec.dim == 2 and lifted.n == avg.n and lifted.t == avg.t
    assert check_provenance(lifted.spec)
    assert np.array_equal(lifted.points(12345), avg.points(12345))


def test_entry_lift_rejects_matrix_input():
    avg = pairwise_sampler(4, F(1, 8), F(1, 4))
    with pytest.raises(SpecInvalid):
        entry_lift(entry_lift(avg, 2), 2)


def test_matrix_plan_example():
    plan = matrix_ellwise_plan(3, 4, F(1, 8), F(1, 2), 4)
    assert plan.ell == 6
    assert plan.gamma == F(1, 8) * F(1, 2) ** 6 / (2**7 * 4)
    assert plan.t >= 16 * 6 * 4 * 4
    assert all(term <= plan.delta / 2 for term in plan.terms())


def test_matrix_plan_dilated_uses_2d():
    h = matrix_ellwise_plan(8, 2, F(1, 10), F(1, 2), 4)
    g = matrix_ellwise_plan(8, 2, F(1, 10), F(1, 2), 4, hermitian=False)
    assert (h.d_plan, g.d_plan) == (2, 4)
    assert g.gamma < h.gamma
    assert all(term <= g.delta / 2 for term in g.terms())


def test_matrix_plan_s_range():
    with pytest.raises(SOutOfRange):
        matrix_ellwise_plan(3, 2, F(1, 4), F(1, 2), 9)
    with pytest.raises(SOutOfRange):
        matrix_ellwise_plan(3, 2, F(1, 4), F(1, 2), 1)
    assert matrix_ellwise_plan(3, 2, F(1, 4), F(1, 2), 8).s == 8


def test_matrix_sampler_provenance():
    s = matrix_ellwise_sampler(matrix_ellwise_plan(4, 2, F(1, 8), F(1, 2), 4, hermitian=False))
    assert s.spec.dim == 2 and check_provenance(s.spec)


def _small_matrix_sampler():
    return matrix_ellwise_sampler(matrix_ellwise_plan(3, 2, F(1, 4), F(1, 2), 4))


def test_constant_function_exact():
    ms = _small_matrix_sampler()
    C = np.array([[0.5, 0.25j], [-0.25j, -0.5]])
    f = MatrixFn.constant(3, C)
    assert np.array_equal(empirical_matrix_mean(ms, BitString(77, ms.n), f), C)
    assert np.allclose(f.mean(), C)


def test_empirical_mean_matches_direct_loop(backend):
    ms = _small_matrix_sampler()
    rng = np.random.Generator(np.random.Philox(4))
    table = random_hermitian_contraction(rng, 2, (8,))
    f = MatrixFn.from_table(table, hermitian=True)
    seed = BitString(0x1F2E3D % (1 << ms.n), ms.n)
    pts = ms.sample(seed).points
    direct = sum(table[int(p)] for p in pts) / len(pts)
    assert np.allclose(empirical_matrix_mean(ms, seed, f), direct, atol=1e-14)


def test_empirical_mean_t1():
    avg = pairwise_sampler(2, F(1, 2), F(1, 2), t=16)
    ms = entry_lift(avg, 1)
    table = np.arange(4, dtype=complex).reshape(4, 1, 1) / 4
    f = MatrixFn.from_table(table, hermitian=True)
    seed = BitString(5, ms.n)
    pts = ms.sample(seed).points
    assert np.allclose(empirical_matrix_mean(ms, seed, f), table[pts.astype(int)].mean(axis=0))


def test_small_matrix_sampler_monte_carlo(backend):
    ms = _small_matrix_sampler()
    fam = TestFunctionFamily("random_hermitian", 3, count=4, params={"d": 2})
    rep = matrix_failure_rate(ms, fam, trials=2000)
    assert rep.passed


def test_rademacher_moment_scalar_example():
    X = np.array([[[1.0]], [[-1.0]]])
    assert exact_rademacher_moment(X, 2) == pytest.approx(2.0)
    assert exact_rademacher_moment(X, 2) <= 1 * (2 * 2) ** 1


def test_bad_q():
    with pytest.raises(BadQ):
        trace_moment_oracle(2, 2, 3, 10)
    with pytest.raises(BadQ):
        exact_rademacher_moment(np.zeros((1, 1, 1)), 0)


def test_trace_moment_small_run():
    rep = trace_moment_oracle(2, 3, 2, 20_000, prng_seed=1)
    assert rep["rademacher"]["pass"] and rep["mean_zero"]["pass"]
    assert rep["rademacher"]["bound"] == 2 * 6
    # With independent signs E Tr(S^2) = sum_i E Tr(X_i^2), and each Tr(X_i^2) <= d.
    assert 0 < rep["rademacher"]["estimate"] <= 2 * 3
