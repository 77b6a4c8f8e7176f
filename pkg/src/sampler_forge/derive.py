"""Strong extractors and list-decodable codes derived from samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._bits import U64
from .bitcore import BitString, ceil_log2
from .errors import (
    BudgetExceeded,
    DomainNotBinary,
    IndexOutOfRange,
    NotNormalized,
    NotStrong,
    BadRadius,
    SpecInvalid,
)
from .generators import as_fraction
from .samplers import Sampler, SamplerSpec, ellwise_plan, ellwise_sampler, pairwise_sampler

__all__ = [
    "ExtractorSpec",
    "Extractor",
    "sampler_to_extractor",
    "statistical_distance",
    "extractor_adversarial_distance",
    "extractor_distance_profile",
    "CodeSpec",
    "Code",
    "sampler_to_code",
    "list_size_at",
    "binary_code_sampler",
]

# n + d ceiling for exact per-source distances.
MAX_EXTRACTOR_BITS = 24
# Message-length ceiling for brute-force list decoding.
MAX_CODE_MESSAGE_BITS = 20
_TABLE_CHUNK = 1 << 22


def _log2_of(x: Fraction) -> int | float:
    """``log2 x``, exact when ``x`` is a power of two."""
    x = Fraction(x)
    if x.numerator == 1 and x.denominator & (x.denominator - 1) == 0:
        return -(x.denominator.bit_length() - 1)
    if x.denominator == 1 and x.numerator & (x.numerator - 1) == 0:
        return x.numerator.bit_length() - 1
    return math.log2(x)


def _seed_table(sampler: Sampler) -> np.ndarray:
    """(2^n, t) array of every seed's points."""
    n, t = sampler.n, sampler.t
    if n + max(1, ceil_log2(t)) > 30:
        raise BudgetExceeded(f"a {n}-bit seed table with t={t} is out of budget")
    rows = []
    step = max(1, _TABLE_CHUNK // max(t, 1))
    for start in range(0, 1 << n, step):
        seeds = np.arange(start, min(start + step, 1 << n), dtype=U64).reshape(-1, 1)
        rows.append(sampler.points_batch(seeds))
    return np.concatenate(rows, axis=0)


# ---------------------------------------------------------------------------
# extractors


@dataclass(frozen=True)
class ExtractorSpec:
    """Parameters of the extractor read off a strong ``(delta, eps)`` sampler."""

    n: int
    d: int
    m: int
    k: int | float
    err: Fraction
    t: int

    @classmethod
    def from_sampler_spec(cls, spec: SamplerSpec) -> "ExtractorSpec":
        k = spec.n - (-_log2_of(spec.delta)) + (-_log2_of(spec.eps))
        return cls(spec.n, ceil_log2(spec.t), spec.m, k, 2 * spec.eps, spec.t)

    def to_dict(self) -> dict:
        k = self.k if isinstance(self.k, int) else float(self.k)
        return {"n": self.n, "d": self.d, "m": self.m, "k": k, "err": str(self.err), "t": self.t}


class Extractor:
    """``Ext(x, y)`` is sample ``y`` of the sampler on seed ``x``."""

    def __init__(self, spec: ExtractorSpec, sampler: Sampler):
        self.spec = spec
        self.sampler = sampler
        self._table: np.ndarray | None = None

    def index(self, y: BitString | int) -> int:
        v = y.value if isinstance(y, BitString) else int(y)
        if not 0 <= v < self.spec.t:
            raise IndexOutOfRange(f"seed value {v} is not a sample index (t={self.spec.t})")
        return v

    def __call__(self, x: BitString, y: BitString | int) -> BitString:
        return self.sampler.evaluate(x, self.index(y))

    def table(self) -> np.ndarray:
        """(2^n, t) outputs for every source string and seed."""
        if self._table is None:
            self._table = _seed_table(self.sampler)
        return self._table


def sampler_to_extractor(s: Sampler) -> tuple[ExtractorSpec, Extractor]:
    """Read a strong sampler as a strong extractor.

    The source is the sampler seed, the extractor seed picks the sample index,
    ``k = n - log2(1/delta) + log2(1/eps)`` and the error is ``2 eps``.

    Raises:
        NotStrong: if the sampler is not strong.
    """
    if not s.strong:
        raise NotStrong("only strong samplers give strong extractors")
    spec = ExtractorSpec.from_sampler_spec(s.spec)
    return spec, Extractor(spec, s)


def statistical_distance(p, q, tol: float = 1e-12) -> float:
    """Half the L1 distance between two distributions on the same universe.

    Raises:
        NotNormalized: if either input does not sum to 1 within ``tol``.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise SpecInvalid("distributions must share a support universe")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < -tol) or abs(v.sum() - 1.0) > tol:
            raise NotNormalized(f"{name} is not a probability vector")
    return float(np.abs(p - q).sum() / 2)


class _FlatSearch:
    """Exact distance bookkeeping for flat sources over an output table."""

    def __init__(self, table: np.ndarray, m: int):
        self.N, self.T = table.shape
        self.M = 1 << m
        # cell[x, y] is the flattened index of (y, Ext(x, y)).
        self.cells = (np.arange(self.T, dtype=np.int64)[None, :] * self.M + table.astype(np.int64))

    def counts(self, members: np.ndarray) -> np.ndarray:
        return np.bincount(self.cells[members].ravel(), minlength=self.T * self.M).astype(np.float64)

    def distance(self, counts: np.ndarray, size: int) -> float:
        # (Ext(X,Y), Y) puts mass count/(size T) on each cell; uniform is 1/(M T).
        return float(np.abs(counts * self.M - size).sum() / (2 * size * self.T * self.M))

    def climb(self, inside: np.ndarray, rng: np.random.Generator, max_steps: int) -> tuple[float, int]:
        """Greedy swaps that raise the distance; returns (distance, evaluations)."""
        size = int(inside.sum())
        counts = self.counts(np.flatnonzero(inside))
        best = self.distance(counts, size)
        evals = 1
        u = size / self.M
        for _ in range(max_steps):
            dev = counts - u
            # Marginal effect of adding or removing one element, cell by cell.
            up = np.abs(dev + 1) - np.abs(dev)
            down = np.abs(dev - 1) - np.abs(dev)
            gain_add = up[self.cells].sum(axis=1)
            gain_rem = down[self.cells].sum(axis=1)
            gain_add[inside] = -np.inf
            gain_rem[~inside] = -np.inf
            top_add = np.argsort(gain_add)[-4:]
            top_rem = np.argsort(gain_rem)[-4:]
            improved = False
            for a in top_add[::-1]:
                for r in top_rem[::-1]:
                    if gain_add[a] + gain_rem[r] <= 0:
                        continue
                    trial = counts.copy()
                    np.add.at(trial, self.cells[a], 1)
                    np.add.at(trial, self.cells[r], -1)
                    dist = self.distance(trial, size)
                    evals += 1
                    if dist > best + 1e-15:
                        inside[a], inside[r] = True, False
                        counts, best, improved = trial, dist, True
                        break
                if improved:
                    break
            if not improved:
                break
        # A random swap as a last exploratory nudge.
        if 0 < size < self.N:
            a = rng.choice(np.flatnonzero(~inside))
            r = rng.choice(np.flatnonzero(inside))
            trial = counts.copy()
            np.add.at(trial, self.cells[a], 1)
            np.add.at(trial, self.cells[r], -1)
            dist = self.distance(trial, size)
            evals += 1
            if dist > best:
                inside[a], inside[r] = True, False
                best = dist
        return best, evals


def extractor_adversarial_distance(
    ext: Extractor,
    k,
    budget: int = 200_000,
    restarts: int = 1000,
    prng_seed: int = 0,
    max_steps: int = 64,
) -> float:
    """Largest distance of ``(Ext(X, Y), Y)`` from uniform found over flat sources.

    Sources are uniform on ``ceil(2^k)`` strings. Each restart starts from a
    random flat source and climbs by greedy swaps. The result is a lower bound
    on the worst case over all min-entropy ``k`` sources.

    Args:
        ext: extractor to attack.
        k: min-entropy; the source size is ``ceil(2^k)``.
        budget: cap on exact distance evaluations.
        restarts: random starting sources.
        prng_seed: seed for the search.
        max_steps: cap on greedy steps per restart.

    Raises:
        BudgetExceeded: if ``n + d`` exceeds the exact-evaluation ceiling.
    """
    spec = ext.spec
    if spec.n + spec.d > MAX_EXTRACTOR_BITS:
        raise BudgetExceeded(f"n + d = {spec.n + spec.d} exceeds {MAX_EXTRACTOR_BITS}")
    N = 1 << spec.n
    size = min(N, max(1, math.ceil(2 ** float(k))))
    search = _FlatSearch(ext.table(), spec.m)
    if size == N:
        return search.distance(search.counts(np.arange(N)), N)
    rng = np.random.Generator(np.random.Philox(prng_seed))
    best, used = 0.0, 0
    for _ in range(restarts):
        if used >= budget:
            break
        inside = np.zeros(N, dtype=bool)
        inside[rng.choice(N, size=size, replace=False)] = True
        dist, evals = search.climb(inside, rng, max_steps)
        used += evals
        best = max(best, dist)
    return best


def extractor_distance_profile(ext: Extractor, ks, **kwargs) -> dict:
    """Adversarial distances for several ``k``, made nonincreasing in ``k``.

    A flat source of larger size is an average of flat sources of any smaller
    size, so the worst case at a smaller ``k`` is at least the worst case at a
    larger one. Carrying the running maximum downward keeps every entry a
    valid lower bound.
    """
    out = {}
    running = 0.0
    for k in sorted(ks, reverse=True):
        running = max(running, extractor_adversarial_distance(ext, k, **kwargs))
        out[k] = running
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# codes


@dataclass(frozen=True)
class CodeSpec:
    """Binary code whose codeword for ``x`` lists the sampler's points on seed ``x``."""

    n: int
    t: int
    rate: Fraction
    rho: Fraction
    L_bound: Fraction

    @classmethod
    def from_sampler_spec(cls, spec: SamplerSpec) -> "CodeSpec":
        return cls(spec.n, spec.t, Fraction(spec.n, spec.t), Fraction(1, 2) - spec.eps, spec.delta * (1 << spec.n))

    @property
    def radius(self) -> int:
        return math.floor(self.rho * self.t)

    def to_dict(self) -> dict:
        return {"n": self.n, "t": self.t, "rate": str(self.rate), "rho": str(self.rho),
                "L_bound": str(self.L_bound), "radius": self.radius}


class Code:
    """Encoder plus a lazily built codeword table for brute-force decoding."""

    def __init__(self, spec: CodeSpec, sampler: Sampler):
        self.spec = spec
        self.sampler = sampler
        self._packed: np.ndarray | None = None

    def encode(self, x: BitString) -> BitString:
        pts = self.sampler.sample(x).points
        return BitString(int(sum(int(b) << i for i, b in enumerate(pts))), self.spec.t)

    def codewords(self) -> np.ndarray:
        """(2^n, ceil(t/8)) packed codewords, bit ``i`` of a row is sample ``i``."""
        if self._packed is None:
            if self.spec.n > MAX_CODE_MESSAGE_BITS:
                raise BudgetExceeded(f"enumerating 2^{self.spec.n} messages is out of budget")
            bits = _seed_table(self.sampler).astype(np.uint8)
            self._packed = np.packbits(bits, axis=1, bitorder="little")
        return self._packed


def sampler_to_code(s: Sampler) -> tuple[CodeSpec, Code]:
    """Read a sampler on ``{0,1}`` as a list-decodable binary code.

    Raises:
        DomainNotBinary: if the sampler's points have more than one bit.
    """
    if s.m != 1:
        raise DomainNotBinary(f"codes need m = 1, got m = {s.m}")
    spec = CodeSpec.from_sampler_spec(s.spec)
    return spec, Code(spec, s)


_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def list_size_at(code: Code, received: BitString, radius: int) -> int:
    """Number of messages whose codeword is within Hamming distance ``radius``.

    Duplicate codewords are counted once per message.

    Raises:
        BadRadius: if ``radius`` is negative.
        BudgetExceeded: if the message space is too large to enumerate.
    """
    if radius < 0:
        raise BadRadius("radius must be non-negative")
    if received.length != code.spec.t:
        raise SpecInvalid(f"received word has {received.length} bits, expected {code.spec.t}")
    words = code.codewords()
    recv = np.frombuffer(received.value.to_bytes(words.shape[1], "little"), dtype=np.uint8)
    dist = _POPCOUNT8[words ^ recv[None, :]].sum(axis=1)
    return int((dist <= radius).sum())


def binary_code_sampler(delta, eps, alpha) -> Sampler:
    """Sampler on ``{0,1}`` for the code construction.

    Uses the l-wise sampler at ``s = eps^(-alpha)`` when ``eps^(-alpha) <= 1/delta``
    and the pairwise sampler otherwise. ``s`` is raised to 2 if smaller.
    """
    delta, eps = as_fraction(delta), as_fraction(eps)
    if float(alpha) <= 0:
        raise SpecInvalid("alpha must be positive")
    a = as_fraction(alpha)
    s_float = float(eps) ** (-float(a))
    if s_float > float(1 / delta):
        return pairwise_sampler(1, delta, eps)
    s = eps ** (-a) if a.denominator == 1 else s_float
    return ellwise_sampler(ellwise_plan(1, delta, eps, max(s, 2)))
