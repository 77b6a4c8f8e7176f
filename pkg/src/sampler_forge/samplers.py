"""Averaging samplers: specs, the sampler interface and base constructions.

A :class:`Sampler` maps a seed of ``n`` bits to ``t`` points of ``m`` bits.
Its :class:`SamplerSpec` carries the declared ``(delta, eps)`` guarantee and a
provenance tree that :func:`rederive` can recompute from first principles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import kernels
from ._bits import U64, extract_field, mask, words_to_int
from .bitcore import BitString, SeedLedger, ceil_log2
from .errors import (
    BadSeedLength,
    BudgetExceeded,
    IndexOutOfRange,
    SOutOfRange,
    SpecInvalid,
)
from .generators import (
    AlmostKWiseGenerator,
    AlmostKWiseSpec,
    ExactKWiseGenerator,
    SampleSequence,
    UniformGenerator,
    as_fraction,
)

__all__ = [
    "SamplerSpec",
    "Sampler",
    "EllWisePlan",
    "full_independence_sampler",
    "pairwise_sampler",
    "ellwise_plan",
    "ellwise_sampler",
    "hash_outer_sampler",
    "hash_parameters",
    "declared_sampler",
    "evaluate",
    "rederive",
    "check_provenance",
    "concentration_terms",
    "exact_log_ratio",
    "next_pow2",
]

# Cap on the number of points materialized at once by ``Sampler.points``.
MAX_MATERIALIZED = 1 << 26


def _frac_str(x: Fraction) -> str:
    return str(x)


def _encode(v: Any) -> Any:
    if isinstance(v, Fraction):
        return _frac_str(v)
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass(frozen=True)
class SamplerSpec:
    """Declared parameters of a sampler plus its construction tree.

    ``dim`` is ``None`` for scalar averaging samplers and the matrix dimension
    for matrix samplers. ``params`` holds the construction inputs needed to
    recompute ``(delta, eps, n, t)``.
    """

    kind: str
    m: int
    t: int
    n: int
    delta: Fraction
    eps: Fraction
    strong: bool
    dim: int | None = None
    params: dict = field(default_factory=dict, compare=False)
    children: tuple["SamplerSpec", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if self.t < 1:
            raise SpecInvalid("t must be at least 1")
        if self.n < 0 or self.m < 1:
            raise SpecInvalid("n must be non-negative and m positive")
        if self.delta <= 0 or self.eps <= 0:
            raise SpecInvalid("delta and eps must be positive")

    @property
    def is_matrix(self) -> bool:
        return self.dim is not None

    def derived(self) -> tuple[Fraction, Fraction, int, int]:
        return (self.delta, self.eps, self.n, self.t)

    def rederive(self) -> tuple[Fraction, Fraction, int, int]:
        return rederive(self)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "m": self.m,
            "t": self.t,
            "n": self.n,
            "delta": _frac_str(self.delta),
            "eps": _frac_str(self.eps),
            "strong": self.strong,
            "dim": self.dim,
            "params": {k: _encode(v) for k, v in self.params.items()},
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamplerSpec":
        return cls(
            kind=data["kind"],
            m=int(data["m"]),
            t=int(data["t"]),
            n=int(data["n"]),
            delta=Fraction(data["delta"]),
            eps=Fraction(data["eps"]),
            strong=bool(data["strong"]),
            dim=data.get("dim"),
            params=dict(data.get("params", {})),
            children=tuple(cls.from_dict(c) for c in data.get("children", [])),
        )


# ---------------------------------------------------------------------------
# provenance re-derivation

_RULES: dict[str, Callable[[SamplerSpec], tuple[Fraction, Fraction, int, int]]] = {}


def register_rule(kind: str):
    def deco(fn):
        _RULES[kind] = fn
        return fn

    return deco


def rederive(spec: SamplerSpec) -> tuple[Fraction, Fraction, int, int]:
    """Recompute ``(delta, eps, n, t)`` from the construction inputs and children."""
    try:
        rule = _RULES[spec.kind]
    except KeyError:
        raise SpecInvalid(f"no derivation rule for kind {spec.kind!r}") from None
    return rule(spec)


def check_provenance(spec: SamplerSpec) -> bool:
    """True iff every node of the tree re-derives its stored values exactly."""
    return all(check_provenance(c) for c in spec.children) and rederive(spec) == spec.derived()


# ---------------------------------------------------------------------------
# exact helpers for parameter formulas


def exact_log_ratio(num: float, den: float) -> Fraction | float:
    """``num / den`` snapped to an exact rational when it is one up to float noise."""
    r = num / den
    for q in (1, 2, 3, 4, 6, 8, 12):
        near = round(r * q)
        if abs(r * q - near) <= 1e-9 * max(1.0, abs(r * q)):
            return Fraction(near, q)
    return r


def _ceil(x: Fraction | float) -> int:
    if isinstance(x, Fraction):
        return math.ceil(x)
    near = round(x)
    if abs(x - near) <= 1e-9 * max(1.0, abs(x)):
        return int(near)
    return math.ceil(x)


def _log2(x) -> float:
    x = as_fraction(x)
    return math.log2(x.numerator) - math.log2(x.denominator)


def next_pow2(t: int) -> int:
    return 1 << (t - 1).bit_length()


def _check_standing(delta: Fraction, eps: Fraction) -> None:
    if not 0 < delta <= eps < 1:
        raise SpecInvalid(f"need 0 < delta <= eps < 1, got delta={delta}, eps={eps}")


def _snap_s(s) -> Fraction | float:
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    if isinstance(s, str):
        return _snap_s(float(s)) if "." in s or "e" in s else Fraction(s)
    near = round(s)
    if abs(s - near) <= 1e-9 * max(1.0, abs(s)):
        return Fraction(near)
    return float(s)


# ---------------------------------------------------------------------------
# sampler interface


class Sampler:
    """Seed-to-points map with a declared guarantee.

    Subclasses implement ``read_seed``, ``points_at`` and optionally faster
    whole-sequence and batched variants.
    """

    def __init__(self, spec: SamplerSpec):
        self.spec = spec

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def t(self) -> int:
        return self.spec.t

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def delta(self) -> Fraction:
        return self.spec.delta

    @property
    def eps(self) -> Fraction:
        return self.spec.eps

    @property
    def strong(self) -> bool:
        return self.spec.strong

    # -- integer-seed primitives --------------------------------------------

    def read_seed(self, ledger: SeedLedger) -> int:
        return ledger.draw(self.n).value

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def points(self, seed: int) -> np.ndarray:
        if self.t > MAX_MATERIALIZED:
            raise BudgetExceeded(f"refusing to materialize {self.t} points")
        return self.points_at(seed, np.arange(self.t, dtype=U64))

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """Points at per-seed indices.

        Args:
            seed_words: (S, W) uint64 seeds.
            indices: (S, T) indices.

        Returns:
            (S, T) uint64 points.
        """
        seed_words = np.atleast_2d(seed_words)
        return np.stack(
            [self.points_at(words_to_int(w), ix) for w, ix in zip(seed_words, np.asarray(indices))]
        ).astype(U64)

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        seed_words = np.atleast_2d(seed_words)
        return np.stack([self.points(words_to_int(w)) for w in seed_words]).astype(U64)

    # -- BitString-facing API -----------------------------------------------

    def _seed_int(self, seed: BitString) -> int:
        if seed.length != self.n:
            raise BadSeedLength(f"seed has {seed.length} bits, expected {self.n}")
        return seed.value

    def draw(self, ledger: SeedLedger) -> SampleSequence:
        """Consume this sampler's seed from ``ledger`` and return every point."""
        return SampleSequence(self.points(self.read_seed(ledger)), self.m)

    def sample(self, seed: BitString) -> SampleSequence:
        return SampleSequence(self.points(self._seed_int(seed)), self.m)

    def evaluate(self, seed: BitString, index: int) -> BitString:
        value = self._seed_int(seed)
        if not 0 <= index < self.t:
            raise IndexOutOfRange(f"index {index} outside [0, {self.t})")
        return BitString(int(self.points_at(value, np.array([index], dtype=U64))[0]), self.m)

    def __repr__(self) -> str:
        s = self.spec
        return f"{type(self).__name__}(kind={s.kind}, m={s.m}, t={s.t}, n={s.n}, delta={s.delta}, eps={s.eps})"


def evaluate(sampler: Sampler, seed: BitString, index: int) -> BitString:
    return sampler.evaluate(seed, index)


# Largest batch of full streams produced before indexing; larger requests go per seed.
_MAX_BATCH_STREAM_BITS = 1 << 30

class GeneratorSampler(Sampler):
    """A sampler whose points come straight from one generator."""

    def __init__(self, spec: SamplerSpec, generator):
        super().__init__(spec)
        self.generator = generator
        if generator.seed_bits != spec.n or generator.t != spec.t:
            raise SpecInvalid("generator shape disagrees with the spec")

    def read_seed(self, ledger: SeedLedger) -> int:
        return self.generator.read_seed(ledger)

    def points(self, seed: int) -> np.ndarray:
        return self.generator.generate(seed)

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        return self.generator.generate_at(seed, indices)

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        return self.generator.generate_batch(seed_words)

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        if isinstance(self.generator, ExactKWiseGenerator):
            return self.generator.generate_batch(seed_words, np.asarray(indices, dtype=U64))
        seed_words = np.atleast_2d(seed_words)
        if seed_words.shape[0] * self.t * self.m > _MAX_BATCH_STREAM_BITS:
            return super().points_at_batch(seed_words, indices)
        full = self.generator.generate_batch(seed_words)
        return np.take_along_axis(full, np.asarray(indices, dtype=np.int64), axis=1)


# ---------------------------------------------------------------------------
# full independence


def full_independence_sampler(m: int, delta, eps) -> Sampler:
    """``t = ceil(ln(2/delta) / (2 eps^2))`` independent points (Hoeffding)."""
    delta, eps = as_fraction(delta), as_fraction(eps)
    _check_standing(delta, eps)
    t = _full_t(delta, eps)
    spec = SamplerSpec("full_independence", m, t, t * m, delta, eps, True)
    return GeneratorSampler(spec, UniformGenerator(t, m))


def _full_t(delta: Fraction, eps: Fraction) -> int:
    return _ceil(math.log(2 / float(delta)) / (2 * float(eps) ** 2))


@register_rule("full_independence")
def _rule_full(spec: SamplerSpec):
    t = _full_t(spec.delta, spec.eps)
    return (spec.delta, spec.eps, t * spec.m, t)


# ---------------------------------------------------------------------------
# pairwise


def pairwise_sampler(m: int, delta, eps, t: int | None = None) -> Sampler:
    """Pairwise independent points with the Chebyshev guarantee.

    By default ``t = ceil(1 / (delta eps^2))``. An explicit ``t`` is accepted
    when ``t >= 1 / (4 delta eps^2)``, which is still enough because a
    ``[0, 1]``-valued function has variance at most 1/4.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    if not (0 < delta < 1 and 0 < eps < 1):
        raise SpecInvalid("delta and eps must lie in (0, 1)")
    t_val = _pairwise_t(delta, eps, t)
    gen = ExactKWiseGenerator(t_val, m, 2)
    spec = SamplerSpec(
        "pairwise", m, t_val, gen.seed_bits, delta, eps, True, params={"t_explicit": t}
    )
    return GeneratorSampler(spec, gen)


def _pairwise_t(delta: Fraction, eps: Fraction, t: int | None) -> int:
    if t is None:
        return math.ceil(1 / (delta * eps * eps))
    if t < 1 or Fraction(t) < 1 / (4 * delta * eps * eps):
        raise SpecInvalid(f"t={t} is below the Chebyshev requirement 1/(4 delta eps^2)")
    return int(t)


@register_rule("pairwise")
def _rule_pairwise(spec: SamplerSpec):
    t = _pairwise_t(spec.delta, spec.eps, spec.params.get("t_explicit"))
    return (spec.delta, spec.eps, 2 * max(spec.m, ceil_log2(t)), t)


# ---------------------------------------------------------------------------
# almost l-wise sampler


def concentration_terms(ell: int, t: int, eps, gamma) -> tuple[Fraction, Fraction]:
    """The two failure terms ``(25 ell / (eps^2 t))^(ell/2)`` and ``gamma / eps^ell``."""
    eps, gamma = as_fraction(eps), as_fraction(gamma)
    return (Fraction(25 * ell) / (eps * eps * t)) ** (ell // 2), gamma / eps**ell


@dataclass(frozen=True)
class EllWisePlan:
    """Parameters of the almost l-wise sampler for domain ``{0,1}^m``."""

    m: int
    delta: Fraction
    eps: Fraction
    s: Fraction | float
    ell: int
    gamma: Fraction
    t: int
    n: int
    const: int = 50
    pad_pow2: bool = False

    @property
    def generator_spec(self) -> AlmostKWiseSpec:
        return AlmostKWiseSpec(self.t, self.m, self.ell, self.gamma)

    def terms(self) -> tuple[Fraction, Fraction]:
        return concentration_terms(self.ell, self.t, self.eps, self.gamma)


def _even_ceil(x: Fraction | float) -> int:
    e = max(2, _ceil(x))
    return e + (e % 2)


def _smallest_t(ell: int, eps: Fraction, target: Fraction, t0: int, term) -> int:
    """Smallest ``t >= t0`` with ``term(t) <= target`` (term decreasing in t)."""
    if term(t0) <= target:
        return t0
    lo, hi = t0, t0 * 2
    while term(hi) > target:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if term(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def ellwise_plan(m: int, delta, eps, s, const: int = 50, pad_pow2: bool = False) -> EllWisePlan:
    """Choose ``ell``, ``gamma`` and ``t`` so both failure terms are at most ``delta/2``.

    ``ell`` is the smallest even integer at least ``2 log2(2/delta) / log2 s``,
    ``gamma = delta eps^ell / 2`` and
    ``t = ceil(const * s * log2(2/delta) / (eps^2 log2 s))``. If rounding ``ell``
    up leaves the first term above ``delta/2``, ``t`` is raised until it is not.
    With ``pad_pow2`` the final ``t`` is rounded up to a power of two.

    Raises:
        SOutOfRange: if ``s < 2`` or ``s > 1/delta``.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    _check_standing(delta, eps)
    s = _snap_s(s)
    if s < 2 or s > 1 / delta:
        raise SOutOfRange(f"s={s} outside [2, 1/delta = {1 / delta}]")
    L = _log2(2 / delta)
    ls = _log2(s)
    ell = _even_ceil(exact_log_ratio(2 * L, ls))
    gamma = delta * eps**ell / 2
    t = _ceil(exact_log_ratio(const * float(s) * L, float(eps) ** 2 * ls))
    target = delta / 2

    def first_term(tt: int) -> Fraction:
        return concentration_terms(ell, tt, eps, gamma)[0]

    t = _smallest_t(ell, eps, target, t, first_term)
    if pad_pow2:
        t = next_pow2(t)
    n = AlmostKWiseSpec(t, m, ell, gamma).seed_bits
    return EllWisePlan(m, delta, eps, s, ell, gamma, t, n, const, pad_pow2)


def ellwise_sampler(plan: EllWisePlan, m: int | None = None) -> Sampler:
    """Strong sampler whose points are a gamma-almost ell-wise independent sequence."""
    if m is not None and m != plan.m:
        plan = ellwise_plan(m, plan.delta, plan.eps, plan.s, plan.const, plan.pad_pow2)
    gen = AlmostKWiseGenerator(plan.generator_spec)
    spec = SamplerSpec(
        "ellwise",
        plan.m,
        plan.t,
        plan.n,
        plan.delta,
        plan.eps,
        True,
        params={
            "s": plan.s,
            "ell": plan.ell,
            "gamma": plan.gamma,
            "const": plan.const,
            "pad_pow2": plan.pad_pow2,
        },
    )
    return GeneratorSampler(spec, gen)


def _param_s(raw) -> Fraction | float:
    if isinstance(raw, (Fraction, float, int)):
        return _snap_s(raw)
    return float(raw) if ("." in raw or "e" in raw) else Fraction(raw)


@register_rule("ellwise")
def _rule_ellwise(spec: SamplerSpec):
    p = spec.params
    plan = ellwise_plan(
        spec.m, spec.delta, spec.eps, _param_s(p["s"]), int(p.get("const", 50)), bool(p.get("pad_pow2", False))
    )
    return (plan.delta, plan.eps, plan.n, plan.t)


# ---------------------------------------------------------------------------
# Toeplitz-hash outer sampler


def hash_parameters(m: int, delta, eps) -> dict:
    """Sizes of the Toeplitz-hash sampler for ``(delta, eps)`` on ``{0,1}^m``.

    Min-entropy ``k = m + ceil(2 log2(1/eps)) - 2`` makes the hash an
    ``eps``-extractor by the leftover hash lemma; a source of
    ``n_x = k + 1 + ceil(log2(1/delta))`` bits then has fewer than
    ``2^(k+1) <= delta 2^n_x`` bad values for any test function.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    k = m + ceil_log2(1 / (eps * eps)) - 2
    n_x = k + 1 + ceil_log2(1 / delta)
    d = n_x + m - 1
    return {"k": k, "n_x": n_x, "d": d}


class HashSampler(Sampler):
    """Sample ``y`` is the Toeplitz hash of the source ``X`` keyed by ``y``.

    Output bit ``r`` is ``XOR_c X_c * y_{r + n_x - 1 - c}``; the ``t = 2^d``
    indices enumerate every key.
    """

    def __init__(self, spec: SamplerSpec):
        super().__init__(spec)
        self.n_x = spec.params["n_x"]
        self.d = spec.params["d"]

    def _hash_python(self, x: int, ys) -> np.ndarray:
        msk = mask(self.m)
        bits = [c for c in range(self.n_x) if (x >> c) & 1]
        out = []
        for y in ys:
            y = int(y)
            acc = 0
            for c in bits:
                acc ^= y >> (self.n_x - 1 - c)
            out.append(acc & msk)
        if self.m <= 64:
            return np.array(out, dtype=U64)
        arr = np.empty(len(out), dtype=object)
        arr[:] = out
        return arr

    def _fits(self) -> bool:
        return self.n_x <= 64 and self.d <= 64

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        if seed < 0 or seed >> self.n:
            raise BadSeedLength(f"seed does not fit in {self.n} bits")
        if self._fits():
            ys = np.asarray(indices, dtype=U64)[None, :]
            return kernels.toeplitz_batch(np.array([seed], dtype=U64), ys, self.n_x, self.m)[0]
        return self._hash_python(seed, indices)

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        seed_words = np.atleast_2d(seed_words)
        if self._fits():
            xs = extract_field(seed_words, 0, self.n_x)[:, 0]
            return kernels.toeplitz_batch(xs, np.asarray(indices, dtype=U64), self.n_x, self.m)
        return super().points_at_batch(seed_words, indices)

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        if self.t > MAX_MATERIALIZED:
            raise BudgetExceeded(f"refusing to materialize {self.t} points")
        seed_words = np.atleast_2d(seed_words)
        idx = np.broadcast_to(np.arange(self.t, dtype=U64), (seed_words.shape[0], self.t))
        return self.points_at_batch(seed_words, idx)


def hash_outer_sampler(m: int, delta, eps) -> Sampler:
    """Extractor-based sampler from Toeplitz hashing; not strong."""
    delta, eps = as_fraction(delta), as_fraction(eps)
    _check_standing(delta, eps)
    hp = hash_parameters(m, delta, eps)
    spec = SamplerSpec("hash", m, 1 << hp["d"], hp["n_x"], delta, eps, False, params=hp)
    return HashSampler(spec)


@register_rule("hash")
def _rule_hash(spec: SamplerSpec):
    hp = hash_parameters(spec.m, spec.delta, spec.eps)
    return (spec.delta, spec.eps, hp["n_x"], 1 << hp["d"])


# ---------------------------------------------------------------------------
# declared specs (metadata only)


def declared_sampler(m: int, t: int, n: int, delta, eps, strong: bool = True) -> SamplerSpec:
    """A spec carrying caller-asserted parameters, for formula checks only."""
    return SamplerSpec("declared", m, t, n, delta, eps, strong, params={"declared": True})


@register_rule("declared")
def _rule_declared(spec: SamplerSpec):
    return spec.derived()


def with_params(spec: SamplerSpec, **changes) -> SamplerSpec:
    return replace(spec, **changes)


class Relabeled(Sampler):
    """Same evaluation map as ``base`` under a different declared spec."""

    def __init__(self, spec: SamplerSpec, base: Sampler):
        super().__init__(spec)
        if (spec.m, spec.t, spec.n) != (base.m, base.t, base.n):
            raise SpecInvalid("relabeled spec must keep m, t and n")
        self.base = base

    def read_seed(self, ledger: SeedLedger) -> int:
        return self.base.read_seed(ledger)

    def points(self, seed: int) -> np.ndarray:
        return self.base.points(seed)

    def points_at(self, seed: int, indices: np.ndarray) -> np.ndarray:
        return self.base.points_at(seed, indices)

    def points_batch(self, seed_words: np.ndarray) -> np.ndarray:
        return self.base.points_batch(seed_words)

    def points_at_batch(self, seed_words: np.ndarray, indices: np.ndarray) -> np.ndarray:
        return self.base.points_at_batch(seed_words, indices)
