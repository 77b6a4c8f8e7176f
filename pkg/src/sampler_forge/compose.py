"""Sampler composition and the parameter presets built on it."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ._bits import U64, extract_field, mask
from .bitcore import SeedLedger
from .errors import AlphaInfeasible, DomainMismatch, InnerNotStrong, SpecInvalid
from .generators import as_fraction
from .matrix import entry_lift, matrix_ellwise_plan, matrix_ellwise_sampler
from .samplers import (
    Relabeled,
    Sampler,
    SamplerSpec,
    _check_standing,
    _snap_s,
    ellwise_plan,
    ellwise_sampler,
    hash_outer_sampler,
    register_rule,
)

__all__ = [
    "strong_compose",
    "matrix_compose",
    "seed_compose",
    "reduction_build",
    "preset_low_randomness",
    "preset_optimal_samples",
    "low_randomness_s",
    "iterate_matrix",
    "iteration_rounds",
]


def _log2_exact(t: int) -> int:
    if t & (t - 1):
        raise DomainMismatch(f"outer sample count {t} is not a power of two")
    return t.bit_length() - 1


class ComposedSampler(Sampler):
    """Points ``outer(X1, inner(X2, i))``; the seed is ``X1`` followed by ``X2``."""

    def __init__(self, spec: SamplerSpec, outer: Sampler, inner: Sampler):
        super().__init__(spec)
        self.outer = outer
        self.inner = inner

    def _split(self, seed: int) -> tuple[int, int]:
        return seed & mask(self.outer.n), seed >> self.outer.n

    def _split_words(self, seed_words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        seed_words = np.atleast_2d(np.asarray(seed_words, dtype=U64))
        w1 = extract_field(seed_words, 0, self.outer.n)
        w2 = extract_field(seed_words, self.outer.n, self.inner.n)
        return w1, w2

    def read_seed(self, ledger: SeedLedger) -> int:
        x1 = self.outer.read_seed(ledger)
        x2 = self.inner.read_seed(ledger)
        return x1 | (x2 << self.outer.n)

    def points(self, seed: int) -> np.ndarray:
        x1, x2 = self._split(seed)
        return self.outer.points_at(x1, self.inner.points(x2))

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        x1, x2 = self._split(seed)
        return self.outer.points_at(x1, self.inner.points_at(x2, indices))

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        w1, w2 = self._split_words(seed_words)
        return self.outer.points_at_batch(w1, self.inner.points_batch(w2))

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        w1, w2 = self._split_words(seed_words)
        return self.outer.points_at_batch(w1, self.inner.points_at_batch(w2, indices))


def _sum_rule(spec: SamplerSpec):
    outer, inner = spec.children
    return (outer.delta + inner.delta, outer.eps + inner.eps, outer.n + inner.n, inner.t)


register_rule("strong_compose")(_sum_rule)
register_rule("matrix_compose")(_sum_rule)


def strong_compose(outer: Sampler, inner: Sampler, params: dict | None = None) -> Sampler:
    """Compose a sampler on ``{0,1}^m`` with a strong sampler on its index set.

    The result is a strong ``(delta1 + delta2, eps1 + eps2)`` sampler with
    ``n1 + n2`` seed bits and the inner sampler's ``t``.

    Raises:
        InnerNotStrong: if the inner sampler is not strong.
        DomainMismatch: if the inner domain is not ``log2(outer.t)`` bits.
    """
    if outer.spec.dim is not None or inner.spec.dim is not None:
        raise SpecInvalid("strong_compose composes scalar samplers; use matrix_compose")
    if not inner.strong:
        raise InnerNotStrong("the inner sampler must be strong")
    d_out = _log2_exact(outer.t)
    if inner.m != d_out:
        raise DomainMismatch(f"inner domain has {inner.m} bits, outer index needs {d_out}")
    o, i = outer.spec, inner.spec
    spec = SamplerSpec(
        "strong_compose", o.m, i.t, o.n + i.n, o.delta + i.delta, o.eps + i.eps, i.strong,
        params=dict(params or {}), children=(o, i),
    )
    return ComposedSampler(spec, outer, inner)


def matrix_compose(outer: Sampler, inner: Sampler, params: dict | None = None) -> Sampler:
    """Matrix analogue of :func:`strong_compose`: ``(delta1 + delta2, eps1 + eps2)``."""
    if outer.spec.dim is None or inner.spec.dim is None:
        raise SpecInvalid("matrix_compose needs two matrix samplers")
    if outer.spec.dim != inner.spec.dim:
        raise DomainMismatch(f"dimensions {outer.spec.dim} and {inner.spec.dim} differ")
    d_out = _log2_exact(outer.t)
    if inner.m != d_out:
        raise DomainMismatch(f"inner domain has {inner.m} bits, outer index needs {d_out}")
    o, i = outer.spec, inner.spec
    spec = SamplerSpec(
        "matrix_compose", o.m, i.t, o.n + i.n, o.delta + i.delta, o.eps + i.eps, False,
        dim=o.dim, params=dict(params or {}), children=(o, i),
    )
    return ComposedSampler(spec, outer, inner)


class SeedComposedSampler(Sampler):
    """Run the outer sampler once per inner point, used as its seed.

    Index ``i * t1 + j`` is point ``j`` of the outer sampler seeded with inner
    point ``i``.
    """

    def __init__(self, spec: SamplerSpec, outer: Sampler, inner: Sampler):
        super().__init__(spec)
        self.outer = outer
        self.inner = inner

    def read_seed(self, ledger: SeedLedger) -> int:
        return self.inner.read_seed(ledger)

    def _outer_rows(self, us: np.ndarray) -> np.ndarray:
        if self.outer.n <= 64:
            return self.outer.points_batch(np.asarray(us, dtype=U64).reshape(-1, 1))
        return np.stack([self.outer.points(int(u)) for u in us])

    def points(self, seed: int) -> np.ndarray:
        return self._outer_rows(self.inner.points(seed)).reshape(-1)

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        t1 = self.outer.t
        us = self.inner.points_at(seed, (idx // t1).astype(U64))
        js = (idx % t1).astype(U64)
        if self.outer.n <= 64:
            return self.outer.points_at_batch(np.asarray(us, dtype=U64).reshape(-1, 1), js[:, None])[:, 0]
        return np.array([self.outer.points_at(int(u), np.array([j]))[0] for u, j in zip(us, js)])

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        us = self.inner.points_batch(seed_words)
        S = us.shape[0]
        return self._outer_rows(us.reshape(-1)).reshape(S, -1)

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        full = self.points_batch(seed_words)
        return np.take_along_axis(full, np.asarray(indices, dtype=np.int64), axis=1)


def seed_compose(outer: Sampler, inner: Sampler) -> Sampler:
    """Feed the points of an averaging sampler in as seeds of a (matrix) sampler.

    With outer ``(delta1, eps1)`` and inner ``(delta2, eps2)`` the result is a
    ``(delta2, 2 delta1 + 2 eps2 + eps1)`` sampler with ``n2`` seed bits and
    ``t1 * t2`` points. A scalar outer sampler is treated as dimension 1.

    Raises:
        DomainMismatch: if the inner domain is not ``outer.n`` bits.
    """
    if inner.spec.dim is not None:
        raise SpecInvalid("the inner sampler of seed_compose must be an averaging sampler")
    if inner.m != outer.n:
        raise DomainMismatch(f"inner domain has {inner.m} bits, outer seed needs {outer.n}")
    o, i = outer.spec, inner.spec
    spec = SamplerSpec(
        "seed_compose", o.m, o.t * i.t, i.n, i.delta, 2 * o.delta + 2 * i.eps + o.eps, False,
        dim=o.dim, children=(o, i),
    )
    return SeedComposedSampler(spec, outer, inner)


@register_rule("seed_compose")
def _rule_seed(spec: SamplerSpec):
    o, i = spec.children
    return (i.delta, 2 * o.delta + 2 * i.eps + o.eps, i.n, o.t * i.t)


# ---------------------------------------------------------------------------
# reduction build and presets


def reduction_build(m: int, delta, eps, s, const: int = 50, pad_pow2: bool = False) -> Sampler:
    """Hash outer sampler at ``(delta/2, eps/2)`` composed with an l-wise inner one.

    The inner sampler lives on the outer index set and is planned at
    ``(delta/2, eps/2, s)``; the result is a strong ``(delta, eps)`` sampler
    with the inner sampler's ``t``.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    _check_standing(delta, eps)
    outer = hash_outer_sampler(m, delta / 2, eps / 2)
    d_out = outer.spec.params["d"]
    inner = ellwise_sampler(ellwise_plan(d_out, delta / 2, eps / 2, s, const, pad_pow2))
    return strong_compose(outer, inner, params={"construction": "reduction_build", "s": _snap_s(s)})


def low_randomness_s(delta, eps, alpha) -> Fraction | float:
    """``s = eps^(-2 alpha) * log2(1/delta)^alpha`` clamped to ``[2, 2/delta]``."""
    delta, eps = as_fraction(delta), as_fraction(eps)
    alpha = float(alpha)
    if alpha <= 0:
        raise SpecInvalid("alpha must be positive")
    log_inv_delta = math.log2(1 / delta)
    s = float(eps) ** (-2 * alpha) * log_inv_delta**alpha
    s = _snap_s(s)
    if s < 2:
        return Fraction(2)
    if s > 2 / delta:
        return 2 / delta
    return s


def preset_low_randomness(m: int, delta, eps, alpha=0.5, pad_pow2: bool = False) -> Sampler:
    """``m + O(log 1/delta)`` seed bits and ``O((log(1/delta)/eps^2)^(1+alpha))`` points."""
    return reduction_build(m, delta, eps, low_randomness_s(delta, eps, alpha), pad_pow2=pad_pow2)


def preset_optimal_samples(m: int, delta, eps, pad_pow2: bool = False) -> Sampler:
    """``O(log(1/delta)/eps^2)`` points, from the reduction build at ``s = 2``."""
    return reduction_build(m, delta, eps, 2, pad_pow2=pad_pow2)


# ---------------------------------------------------------------------------
# iterated matrix construction


def iteration_rounds(d: int) -> int:
    """``max(1, ceil(log2 log2 d))``: the smallest ``r >= 1`` with ``2^(2^r) >= d``."""
    if d < 2:
        raise SpecInvalid("d must be at least 2")
    r = 1
    while (1 << (1 << r)) < d:
        r += 1
    return r


_ALPHA_LADDER = tuple(Fraction(1, 1 << j) for j in range(1, 21))


def _choose_alpha(t: int, eps: Fraction, delta: Fraction, d: int) -> tuple[Fraction, Fraction | float]:
    """Largest alpha in 1/2, 1/4, ... with ``(t/eps)^alpha <= d/delta`` and ``s >= 2``."""
    limit = math.log2(d / delta)
    base = math.log2(t / eps)
    for alpha in _ALPHA_LADDER:
        if float(alpha) * base <= limit + 1e-12:
            s = _snap_s(2 ** (float(alpha) * base))
            if s < 2:
                break
            return alpha, s
    raise AlphaInfeasible(f"no alpha <= 1/2 admits (t/eps)^alpha <= d/delta with s >= 2 (t={t})")


def iterate_matrix(m: int, d: int, delta, eps, alpha=0.5, hermitian: bool = True) -> Sampler:
    """Iterated sample-size reduction for d-dimensional matrix samplers.

    Splits ``(delta, eps)`` evenly over ``r`` rounds. Round 1 is the entrywise
    lift of the low-randomness preset built at ``(delta_r / (2 d^2), eps_r / (2d))``
    so the lift lands at ``(delta_r, eps_r)``. Every later round composes the
    current sampler with a matrix l-wise sampler on its index set at
    ``s = (t / eps_r)^a`` for the largest admissible ``a``. Sample counts are
    padded to powers of two so each index set is a bit-string domain.

    Raises:
        AlphaInfeasible: when no round parameter satisfies the size precondition.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    _check_standing(delta, eps)
    r = iteration_rounds(d)
    dr, er = delta / r, eps / r
    base = preset_low_randomness(m, dr / (2 * d * d), er / (2 * d), alpha, pad_pow2=True)
    cur = entry_lift(base, d)
    alphas = []
    for _ in range(1, r):
        a, s = _choose_alpha(cur.t, er, dr, d)
        alphas.append(str(a))
        plan = matrix_ellwise_plan(cur.t.bit_length() - 1, d, dr, er, s, hermitian=hermitian, pad_pow2=True)
        cur = matrix_compose(cur, matrix_ellwise_sampler(plan))
    spec = SamplerSpec(
        "iterate_matrix", cur.m, cur.t, cur.n, cur.delta, cur.eps, False, dim=d,
        params={"rounds": r, "alphas": alphas, "alpha": alpha, "hermitian": hermitian},
        children=(cur.spec,),
    )
    return Relabeled(spec, cur)


@register_rule("iterate_matrix")
def _rule_iterate(spec: SamplerSpec):
    (c,) = spec.children
    return (c.delta, c.eps, c.n, c.t)
