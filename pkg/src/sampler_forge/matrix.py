"""Complex matrices, spectral norms, Hermitian dilation and matrix samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from ._bits import U64
from .bitcore import BitString
from .errors import BadQ, NoConvergence, SOutOfRange, SpecInvalid
from .generators import AlmostKWiseGenerator, AlmostKWiseSpec, as_fraction
from .samplers import (
    GeneratorSampler,
    Relabeled,
    Sampler,
    SamplerSpec,
    _ceil,
    _even_ceil,
    _log2,
    _param_s,
    _smallest_t,
    _snap_s,
    exact_log_ratio,
    next_pow2,
    register_rule,
)

__all__ = [
    "as_matrix",
    "spectral_norm",
    "spectral_norms",
    "hermitian_dilation",
    "matrix_to_json",
    "matrix_from_json",
    "MatrixFn",
    "MatrixEllWisePlan",
    "entry_lift",
    "matrix_ellwise_plan",
    "matrix_ellwise_sampler",
    "matrix_terms",
    "empirical_matrix_mean",
    "random_contraction",
    "random_hermitian_contraction",
    "trace_moment_oracle",
    "exact_rademacher_moment",
]


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SpecInvalid(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise SpecInvalid("matrix has non-finite entries")
    return A


def _power_iterate(B: np.ndarray, v: np.ndarray, tol: float, max_iter: int) -> float:
    """Largest eigenvalue of the PSD matrix ``B`` by power iteration from ``v``.

    ``B`` is repeatedly squared (renormalized) so each step advances the
    iteration by a growing power; the estimate is a Rayleigh quotient on the
    original ``B``.
    """
    P = B / max(np.abs(B).max(), 1e-300)
    prev = -1.0
    for it in range(max_iter):
        w = P @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = float(np.real(np.vdot(v, B @ v)))
        if abs(est - prev) <= tol * max(abs(est), 1e-300):
            return est
        prev = est
        if it < 60:
            P = P @ P
            scale = np.abs(P).max()
            if scale == 0.0:
                return est
            P = P / scale
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def spectral_norm(A, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value via power iteration on ``A* A``.

    The iteration starts from the normalized all-ones vector and from a fixed
    perturbation of it, keeping the larger result, so an unlucky start
    orthogonal to the top singular vector cannot stall the estimate.

    Raises:
        NoConvergence: if ``max_iter`` steps do not reach relative tolerance ``tol``.
    """
    A = as_matrix(A)
    d = A.shape[0]
    B = A.conj().T @ A
    if not np.abs(B).max() > 0:
        return 0.0
    ones = np.ones(d, dtype=np.complex128) / math.sqrt(d)
    pert = ones + np.exp(1j * np.arange(1, d + 1)) * (np.arange(1, d + 1) / (d + 1))
    pert = pert / np.linalg.norm(pert)
    lam = max(_power_iterate(B, ones, tol, max_iter), _power_iterate(B, pert, tol, max_iter))
    return math.sqrt(max(lam, 0.0))


def spectral_norms(As: np.ndarray, hermitian: bool = False) -> np.ndarray:
    """Spectral norms of a stack (..., d, d) via LAPACK, for bulk harness use."""
    As = np.asarray(As)
    if As.shape[-1] == 1:
        return np.abs(As[..., 0, 0])
    if hermitian:
        return np.abs(np.linalg.eigvalsh(As)).max(axis=-1)
    return np.linalg.norm(As, ord=2, axis=(-2, -1))


def hermitian_dilation(A) -> np.ndarray:
    """The 2d x 2d Hermitian block matrix ``[[0, A], [A*, 0]]``."""
    A = as_matrix(A)
    d = A.shape[0]
    H = np.zeros((2 * d, 2 * d), dtype=np.complex128)
    H[:d, d:] = A
    H[d:, :d] = A.conj().T
    return H


def matrix_to_json(A) -> list:
    A = as_matrix(A)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def matrix_from_json(rows) -> np.ndarray:
    return as_matrix([[complex(re, im) for re, im in row] for row in rows])


def random_contraction(rng: np.random.Generator, d: int) -> np.ndarray:
    """A random complex matrix rescaled to spectral norm uniform in (0, 1]."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return G / np.linalg.norm(G, 2) * (1.0 - rng.random())


def random_hermitian_contraction(rng: np.random.Generator, d: int, size: tuple[int, ...] = ()) -> np.ndarray:
    """Random Hermitian matrices of spectral norm at most 1, shape ``size + (d, d)``."""
    G = rng.standard_normal(size + (d, d)) + 1j * rng.standard_normal(size + (d, d))
    H = (G + np.swapaxes(G.conj(), -1, -2)) / 2
    norms = np.abs(np.linalg.eigvalsh(H)).max(axis=-1)
    return H / norms[..., None, None]


@dataclass
class MatrixFn:
    """A matrix-valued test function on ``{0,1}^m`` with ``||f(x)|| <= 1``.

    ``evaluator`` maps a uint64 array of points to a (N, d, d) complex array.
    """

    m: int
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    hermitian: bool = True
    norm_bound: float = 1.0
    name: str = "matrix_fn"

    def __call__(self, points) -> np.ndarray:
        return self.evaluator(np.asarray(points, dtype=U64))

    def table(self) -> np.ndarray:
        if self.m > 24:
            raise SpecInvalid("exhaustive tables need m <= 24")
        return self(np.arange(1 << self.m, dtype=U64))

    def mean(self) -> np.ndarray:
        return self.table().mean(axis=0)

    @classmethod
    def from_table(cls, table: np.ndarray, hermitian: bool, name: str = "table") -> "MatrixFn":
        table = np.asarray(table, dtype=np.complex128)
        m = int(table.shape[0]).bit_length() - 1
        if table.shape[0] != 1 << m:
            raise SpecInvalid("table length must be a power of two")
        return cls(m, table.shape[1], lambda pts: table[pts.astype(np.int64)], hermitian, 1.0, name)

    @classmethod
    def constant(cls, m: int, C) -> "MatrixFn":
        C = as_matrix(C)
        herm = bool(np.allclose(C, C.conj().T))
        return cls(m, C.shape[0], lambda pts: np.broadcast_to(C, (len(pts),) + C.shape).copy(), herm, 1.0, "constant")


# ---------------------------------------------------------------------------
# entrywise lift


def entry_lift(avg: Sampler, d: int) -> Sampler:
    """Reuse a ``(delta, eps)`` averaging sampler as a d-dimensional matrix sampler.

    Each of the ``2 d^2`` real and imaginary entry functions is handled by the
    scalar guarantee, giving ``(2 d^2 delta, 2 d eps)``.
    """
    if avg.spec.dim is not None:
        raise SpecInvalid("entry_lift expects a scalar averaging sampler")
    if d < 1:
        raise SpecInvalid("d must be positive")
    s = avg.spec
    spec = SamplerSpec(
        "entry_lift", s.m, s.t, s.n, 2 * d * d * s.delta, 2 * d * s.eps, False, dim=d,
        params={"d": d}, children=(s,),
    )
    return Relabeled(spec, avg)


@register_rule("entry_lift")
def _rule_entry_lift(spec: SamplerSpec):
    (c,) = spec.children
    d = spec.params["d"]
    return (2 * d * d * c.delta, 2 * d * c.eps, c.n, c.t)


# ---------------------------------------------------------------------------
# matrix l-wise sampler


def matrix_terms(ell: int, t: int, d: int, eps, gamma) -> tuple[Fraction, Fraction]:
    """Failure terms ``d (16 ell / (eps^2 t))^(ell/2)`` and ``2^ell gamma d / eps^ell``."""
    eps, gamma = as_fraction(eps), as_fraction(gamma)
    return (
        d * (Fraction(16 * ell) / (eps * eps * t)) ** (ell // 2),
        (1 << ell) * gamma * d / eps**ell,
    )


@dataclass(frozen=True)
class MatrixEllWisePlan:
    """Parameters of the matrix almost l-wise sampler.

    ``d_plan`` is the dimension used in the formulas: ``d`` for Hermitian
    test functions, ``2d`` when general functions go through the dilation.
    """

    m: int
    d: int
    d_plan: int
    delta: Fraction
    eps: Fraction
    s: Fraction | float
    ell: int
    gamma: Fraction
    t: int
    n: int
    hermitian: bool = True
    pad_pow2: bool = False

    @property
    def generator_spec(self) -> AlmostKWiseSpec:
        return AlmostKWiseSpec(self.t, self.m, self.ell, self.gamma)

    def terms(self) -> tuple[Fraction, Fraction]:
        return matrix_terms(self.ell, self.t, self.d_plan, self.eps, self.gamma)


def matrix_ellwise_plan(m: int, d: int, delta, eps, s, hermitian: bool = True, pad_pow2: bool = False) -> MatrixEllWisePlan:
    """``ell`` even and at least ``2 log2(2d/delta) / log2 s``,
    ``gamma = delta eps^ell / (2^(ell+1) d)`` and ``t = ceil(16 ell s / eps^2)``.

    For non-Hermitian test functions the formulas use ``2d``.

    Raises:
        SOutOfRange: if ``s < 2`` or ``s > d/delta``.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    if not 0 < delta < 1 or eps <= 0:
        raise SpecInvalid("need 0 < delta < 1 and eps > 0")
    if d < 1:
        raise SpecInvalid("d must be positive")
    dp = d if hermitian else 2 * d
    s = _snap_s(s)
    if s < 2 or s > dp / delta:
        raise SOutOfRange(f"s={s} outside [2, d/delta = {dp / delta}]")
    ell = _even_ceil(exact_log_ratio(2 * _log2(2 * dp / delta), _log2(s)))
    gamma = delta * eps**ell / ((1 << (ell + 1)) * dp)
    if isinstance(s, Fraction):
        t = math.ceil(16 * ell * s / (eps * eps))
    else:
        t = _ceil(16 * ell * s / float(eps) ** 2)
    t = _smallest_t(ell, eps, delta / 2, t, lambda tt: matrix_terms(ell, tt, dp, eps, gamma)[0])
    if pad_pow2:
        t = next_pow2(t)
    n = AlmostKWiseSpec(t, m, ell, gamma).seed_bits
    return MatrixEllWisePlan(m, d, dp, delta, eps, s, ell, gamma, t, n, hermitian, pad_pow2)


def matrix_ellwise_sampler(plan: MatrixEllWisePlan) -> Sampler:
    """d-dimensional ``(delta, eps)`` matrix sampler from an almost l-wise sequence."""
    gen = AlmostKWiseGenerator(plan.generator_spec)
    spec = SamplerSpec(
        "matrix_ellwise", plan.m, plan.t, plan.n, plan.delta, plan.eps, True, dim=plan.d,
        params={"s": plan.s, "hermitian": plan.hermitian, "pad_pow2": plan.pad_pow2,
                "ell": plan.ell, "gamma": plan.gamma},
    )
    return GeneratorSampler(spec, gen)


@register_rule("matrix_ellwise")
def _rule_matrix_ellwise(spec: SamplerSpec):
    p = spec.params
    plan = matrix_ellwise_plan(
        spec.m, spec.dim, spec.delta, spec.eps, _param_s(p["s"]),
        bool(p.get("hermitian", True)), bool(p.get("pad_pow2", False)),
    )
    return (plan.delta, plan.eps, plan.n, plan.t)


# ---------------------------------------------------------------------------
# estimators and moment oracles


def empirical_matrix_mean(ms: Sampler, seed: BitString, f: MatrixFn) -> np.ndarray:
    """``(1/t) sum_i f(Z_i)`` over the sampler's points for ``seed``."""
    pts = ms.sample(seed).points
    vals = f(pts)
    return vals.mean(axis=0)


def exact_rademacher_moment(Xs: np.ndarray, q: int) -> float:
    """``E_eps Tr((sum_i eps_i X_i)^q)`` by enumerating all sign patterns."""
    if q < 2 or q % 2:
        raise BadQ(f"q must be an even integer >= 2, got {q}")
    Xs = np.asarray(Xs, dtype=np.complex128)
    t = Xs.shape[0]
    signs = 1 - 2 * ((np.arange(1 << t)[:, None] >> np.arange(t)) & 1)
    S = np.einsum("st,tij->sij", signs.astype(np.complex128), Xs)
    return float(np.real(np.trace(np.linalg.matrix_power(S, q), axis1=-2, axis2=-1)).mean())


_Z99 = 2.3263478740408408


def trace_moment_oracle(d: int, t: int, q: int, trials: int, prng_seed: int = 0, chunk: int = 20_000) -> dict:
    """Monte-Carlo trace moments of sums of random Hermitian contractions.

    ``rademacher`` estimates ``E Tr((sum_i eps_i X_i)^q)`` with independent
    random Hermitian contractions ``X_i`` and Rademacher signs; ``mean_zero``
    estimates ``E Tr((sum_i X_i)^q)`` for ``X_i = (H_i - H_i')/2`` built from two
    independent contractions, which is mean zero with norm at most 1. Each
    entry reports the sample mean, a one-sided 99% upper confidence bound
    (normal approximation) and the corresponding bound.

    Raises:
        BadQ: if ``q`` is odd or below 2.
    """
    if q < 2 or q % 2:
        raise BadQ(f"q must be an even integer >= 2, got {q}")
    rng = np.random.Generator(np.random.Philox(prng_seed))
    sums = {"rademacher": [0.0, 0.0], "mean_zero": [0.0, 0.0]}
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        X = random_hermitian_contraction(rng, d, (c, t))
        eps = rng.integers(0, 2, size=(c, t)) * 2 - 1
        S1 = np.einsum("ct,ctij->cij", eps.astype(np.complex128), X)
        Y = (random_hermitian_contraction(rng, d, (c, t)) - random_hermitian_contraction(rng, d, (c, t))) / 2
        S2 = Y.sum(axis=1)
        for key, S in (("rademacher", S1), ("mean_zero", S2)):
            vals = np.real(np.trace(np.linalg.matrix_power(S, q), axis1=-2, axis2=-1))
            sums[key][0] += float(vals.sum())
            sums[key][1] += float((vals * vals).sum())
        done += c
    bounds = {"rademacher": d * (q * t) ** (q // 2), "mean_zero": d * (4 * q * t) ** (q // 2)}
    report = {"d": d, "t": t, "q": q, "trials": trials, "prng_seed": prng_seed}
    for key, (s1, s2) in sums.items():
        mean = s1 / trials
        var = max(s2 / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
        upper = mean + _Z99 * math.sqrt(var / trials)
        report[key] = {"estimate": mean, "upper99": upper, "bound": bounds[key], "pass": upper <= bounds[key]}
    return report
