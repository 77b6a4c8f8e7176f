"""Empirical verification of declared sampler guarantees.

Failure rates are measured against batteries of test functions, either
exhaustively over every seed or by Monte Carlo with a Wilson interval. A
passing report is labelled "battery-pass": a finite battery can refute a
guarantee but never certify it.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from scipy.stats import binomtest

from ._bits import U64
from .bitcore import BitString, SeedLedger
from .compose import SeedComposedSampler
from .errors import BadP, BudgetExceeded, NotStrong, SpecInvalid, TapeExhausted
from .generators import as_fraction
from .matrix import hermitian_dilation, random_contraction, random_hermitian_contraction, spectral_norms
from .samplers import MAX_MATERIALIZED, Sampler, concentration_terms

__all__ = [
    "SCALAR_KINDS",
    "MATRIX_KINDS",
    "TestFunctionFamily",
    "VerificationReport",
    "AuditResult",
    "failure_rate",
    "strong_failure_rate",
    "matrix_failure_rate",
    "concentration_check",
    "mz_constant",
    "mz_oracle",
    "randomness_audit",
    "seed_words",
    "wilson_interval",
]

SCALAR_KINDS = ("random_balanced", "dictator", "hamming_threshold", "sparse_indicator", "random_bounded_real")
MATRIX_KINDS = ("rank1_projector", "random_hermitian", "dilated_contraction")

# Largest m for which families are tabulated over the whole domain.
MAX_TABLE_BITS = 22
DEFAULT_BUDGET = 1 << 24
# Target number of (seed, index) cells per evaluation chunk.
_CHUNK_CELLS = 1 << 22
# Slack on floating-point norm comparisons.
NORM_SLACK = 1e-9
_REAL_LEVELS = 256


def _rng(prng_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(prng_seed)))


# ---------------------------------------------------------------------------
# test-function families


@dataclass
class TestFunctionFamily:
    """A battery of ``count`` test functions of one kind on ``{0,1}^m``.

    Scalar kinds are integer tables divided by a common ``scale`` so that
    means and failure events are exact. Matrix kinds are complex tables of
    shape ``(2^m, D, D)`` with spectral norm at most 1.

    Attributes:
        kind: one of ``SCALAR_KINDS`` or ``MATRIX_KINDS``.
        m: input bits.
        count: number of functions.
        prng_seed: seed for the random choices.
        params: kind-specific settings (``density`` for sparse_indicator,
            ``d`` for matrix kinds).
    """

    __test__ = False

    kind: str
    m: int
    count: int = 20
    prng_seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS + MATRIX_KINDS:
            raise SpecInvalid(f"unknown family kind {self.kind!r}")
        if self.m < 1 or self.count < 1:
            raise SpecInvalid("need m >= 1 and count >= 1")
        if self.m > MAX_TABLE_BITS:
            raise BudgetExceeded(f"{self.kind} has no closed form here; m={self.m} is too large to tabulate")
        self._tables: np.ndarray | None = None

    @property
    def is_matrix(self) -> bool:
        return self.kind in MATRIX_KINDS

    @property
    def scale(self) -> int:
        return _REAL_LEVELS if self.kind == "random_bounded_real" else 1

    @property
    def dim(self) -> int:
        d = int(self.params.get("d", 2))
        return 2 * d if self.kind == "dilated_contraction" else d

    @property
    def hermitian(self) -> bool:
        return True

    def tables(self) -> np.ndarray:
        """Scalar: (count, 2^m) int64. Matrix: (count, 2^m, D, D) complex128."""
        if self._tables is None:
            self._tables = self._build()
        return self._tables

    def _build(self) -> np.ndarray:
        rng = _rng(self.prng_seed)
        N = 1 << self.m
        kind = self.kind
        if kind == "random_balanced":
            rows = []
            for _ in range(self.count):
                row = np.zeros(N, dtype=np.int64)
                row[rng.permutation(N)[: N // 2]] = 1
                rows.append(row)
            return np.stack(rows)
        if kind == "dictator":
            xs = np.arange(N, dtype=np.int64)
            coords = rng.integers(0, self.m, size=self.count)
            return np.stack([(xs >> c) & 1 for c in coords])
        if kind == "hamming_threshold":
            weights = np.array([bin(x).count("1") for x in range(N)], dtype=np.int64)
            thresholds = rng.integers(1, self.m + 1, size=self.count)
            return np.stack([(weights >= th).astype(np.int64) for th in thresholds])
        if kind == "sparse_indicator":
            density = Fraction(self.params.get("density", Fraction(1, 8)))
            size = max(1, int(N * density))
            rows = []
            for _ in range(self.count):
                row = np.zeros(N, dtype=np.int64)
                row[rng.choice(N, size=size, replace=False)] = 1
                rows.append(row)
            return np.stack(rows)
        if kind == "random_bounded_real":
            return rng.integers(0, _REAL_LEVELS + 1, size=(self.count, N), dtype=np.int64)
        d = int(self.params.get("d", 2))
        if kind == "rank1_projector":
            v = rng.normal(size=(self.count, N, d)) + 1j * rng.normal(size=(self.count, N, d))
            v /= np.linalg.norm(v, axis=-1, keepdims=True)
            return np.einsum("fxi,fxj->fxij", v, v.conj())
        if kind == "random_hermitian":
            return random_hermitian_contraction(rng, d, (self.count, N))
        # dilated_contraction: x -> H(A_x) for a random contraction A_x.
        out = np.empty((self.count, N, 2 * d, 2 * d), dtype=np.complex128)
        for f in range(self.count):
            for x in range(N):
                out[f, x] = hermitian_dilation(random_contraction(rng, d))
        return out

    def totals(self) -> np.ndarray:
        """Scalar: integer sums over the domain. Matrix: exact-in-float means."""
        tab = self.tables()
        if self.is_matrix:
            return tab.mean(axis=1)
        return tab.sum(axis=1)

    def max_norm(self) -> float:
        if not self.is_matrix:
            return float(self.tables().max()) / self.scale
        tab = self.tables()
        return float(spectral_norms(tab.reshape(-1, tab.shape[-2], tab.shape[-1]), hermitian=True).max())

    def to_dict(self) -> dict:
        params = {k: str(v) if isinstance(v, Fraction) else v for k, v in self.params.items()}
        return {"kind": self.kind, "m": self.m, "count": self.count, "prng_seed": self.prng_seed, "params": params}

    @classmethod
    def from_dict(cls, data: dict) -> "TestFunctionFamily":
        params = dict(data.get("params", {}))
        if "density" in params:
            params["density"] = Fraction(str(params["density"]))
        return cls(data["kind"], int(data["m"]), int(data.get("count", 20)), int(data.get("prng_seed", 0)), params)


# ---------------------------------------------------------------------------
# reports


def wilson_interval(failures: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(failures), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class AuditResult:
    """Outcome of running a sampler once on a tape of exactly its declared length."""

    passed: bool
    n: int
    cursor: int
    tape_bits: int
    draws: list[int]
    points_checked: int
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "n": self.n, "cursor": self.cursor, "tape_bits": self.tape_bits,
            "draws": self.draws, "points_checked": self.points_checked, "error": self.error,
        }


@dataclass
class VerificationReport:
    """Per-function failure counts with a verdict against the declared delta."""

    spec: dict
    family: dict
    mode: str
    trials: int
    failures: list[int]
    declared_delta: Fraction
    threshold: Fraction | float
    wall_clock: float
    audit: AuditResult | None = None

    @property
    def rates(self) -> list[Fraction]:
        return [Fraction(f, self.trials) for f in self.failures]

    @property
    def wilson(self) -> list[tuple[float, float]]:
        if self.mode == "exhaustive":
            return [(float(r), float(r)) for r in self.rates]
        return [wilson_interval(f, self.trials) for f in self.failures]

    @property
    def passed(self) -> bool:
        if self.mode == "exhaustive":
            ok = all(r <= self.declared_delta for r in self.rates)
        else:
            ok = all(hi <= float(self.declared_delta) for _, hi in self.wilson)
        return ok and (self.audit is None or self.audit.passed)

    @property
    def verdict(self) -> str:
        return "battery-pass" if self.passed else "battery-fail"

    @property
    def max_rate(self) -> Fraction:
        return max(self.rates) if self.failures else Fraction(0)

    def rows(self) -> list[dict]:
        return [
            {"function_id": i, "failures": f, "trials": self.trials, "rate": float(Fraction(f, self.trials)), "wilson_hi": hi}
            for i, (f, (_, hi)) in enumerate(zip(self.failures, self.wilson))
        ]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "family": self.family,
            "mode": self.mode,
            "trials": self.trials,
            "failures": self.failures,
            "max_rate": str(self.max_rate),
            "declared_delta": str(self.declared_delta),
            "threshold": str(self.threshold),
            "functions": self.rows(),
            "verdict": self.verdict,
            "audit": None if self.audit is None else self.audit.to_dict(),
            "wall_clock": self.wall_clock,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["function_id", "failures", "trials", "rate", "wilson_hi"])
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


# ---------------------------------------------------------------------------
# seed iteration


def seed_words(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform ``n``-bit seeds as (count, ceil(n/64)) uint64 words."""
    W = max(1, -(-n // 64))
    words = rng.integers(0, 1 << 64, size=(count, W), dtype=np.uint64, endpoint=False)
    top = n - 64 * (W - 1)
    if top < 64:
        words[:, -1] &= U64((1 << top) - 1)
    return words


def _seed_batches(n: int, t: int, mode: str, trials: int | None, prng_seed: int, budget: int):
    """Yield (S, W) seed-word batches; returns the total trial count first."""
    per = max(1, min(4096, _CHUNK_CELLS // max(t, 1)))
    if mode == "exhaustive":
        if n > 62 or (1 << n) > budget:
            raise BudgetExceeded(f"exhaustive run over 2^{n} seeds exceeds budget {budget}")
        total = 1 << n

        def gen():
            for start in range(0, total, per):
                yield np.arange(start, min(start + per, total), dtype=U64).reshape(-1, 1)

        return total, gen()
    if mode != "monte_carlo":
        raise SpecInvalid(f"mode must be 'exhaustive' or 'monte_carlo', got {mode!r}")
    if trials is None or trials < 1:
        raise SpecInvalid("monte_carlo mode needs trials >= 1")
    rng = _rng(prng_seed)

    def gen():
        done = 0
        while done < trials:
            k = min(per, trials - done)
            done += k
            yield seed_words(n, k, rng)

    return trials, gen()


def _threshold(eps) -> Fraction:
    return as_fraction(eps)


def _exceeds(diff: np.ndarray, scale_denominator: int, eps: Fraction) -> np.ndarray:
    """``|diff| / scale_denominator > eps`` with integer arithmetic."""
    lhs = np.abs(diff)
    rhs = eps.numerator * scale_denominator
    if lhs.size and int(lhs.max()) * eps.denominator >= 1 << 62:
        lhs = lhs.astype(object)
    return lhs * eps.denominator > rhs


# ---------------------------------------------------------------------------
# scalar failure rates


def _outer_sum_table(s: Sampler, tab: np.ndarray) -> np.ndarray | None:
    """For a seed-composed sampler, each function's outer sum on every outer seed.

    The composed sum is then the sum of table entries over the inner points,
    which avoids materializing all ``t1 * t2`` points per seed.
    """
    if not isinstance(s, SeedComposedSampler) or s.outer.n > 20:
        return None
    seeds = np.arange(1 << s.outer.n, dtype=U64).reshape(-1, 1)
    pts = s.outer.points_batch(seeds).astype(np.int64)
    return np.stack([row[pts].sum(axis=1) for row in tab])


def failure_rate(
    s: Sampler,
    fam: TestFunctionFamily,
    mode: str = "exhaustive",
    trials: int | None = None,
    prng_seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    eps=None,
    delta=None,
) -> VerificationReport:
    """Fraction of seeds on which ``|mean_i f(Z_i) - E f| > eps``, per function.

    ``eps`` and ``delta`` default to the sampler's declared values.

    Raises:
        BudgetExceeded: if exhaustive mode needs more than ``budget`` seeds.
    """
    if fam.is_matrix:
        raise SpecInvalid("use matrix_failure_rate for matrix families")
    if fam.m != s.m:
        raise SpecInvalid(f"family is on {fam.m} bits, sampler on {s.m}")
    start = time.perf_counter()
    eps = _threshold(s.eps if eps is None else eps)
    delta = as_fraction(s.delta if delta is None else delta)
    tab = fam.tables()
    totals = fam.totals()
    N, t = 1 << fam.m, s.t
    total, batches = _seed_batches(s.n, t, mode, trials, prng_seed, budget)
    fails = np.zeros(fam.count, dtype=np.int64)
    denom = t * N * fam.scale
    outer_sums = _outer_sum_table(s, tab)
    for words in batches:
        if outer_sums is None:
            pts = s.points_batch(words).astype(np.int64)
            sums_all = [tab[j][pts].sum(axis=1) for j in range(fam.count)]
        else:
            seeds = s.inner.points_batch(words).astype(np.int64)
            sums_all = [outer_sums[j][seeds].sum(axis=1) for j in range(fam.count)]
        for j, sums in enumerate(sums_all):
            fails[j] += int(_exceeds(N * sums - t * totals[j], denom, eps).sum())
    return VerificationReport(
        s.spec.to_dict(), fam.to_dict(), mode, total, [int(f) for f in fails], delta, eps,
        time.perf_counter() - start,
    )


def strong_failure_rate(
    s: Sampler,
    sequences: Sequence[TestFunctionFamily] | TestFunctionFamily,
    mode: str = "exhaustive",
    trials: int | None = None,
    prng_seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    eps=None,
    delta=None,
) -> VerificationReport:
    """Failure rate for function sequences: ``|(1/t) sum_i (f_i(Z_i) - E f_i)| > eps``.

    Each entry of ``sequences`` is a family with exactly ``t`` functions,
    function ``i`` being applied at index ``i``.

    Raises:
        NotStrong: if the sampler is not declared strong.
        BudgetExceeded: if exhaustive mode needs more than ``budget`` seeds.
    """
    if not s.strong:
        raise NotStrong("strong failure rates need a strong sampler")
    if isinstance(sequences, TestFunctionFamily):
        sequences = [sequences]
    for seq in sequences:
        if seq.is_matrix or seq.count != s.t or seq.m != s.m:
            raise SpecInvalid("each sequence must hold exactly t scalar functions on the sampler's domain")
    start = time.perf_counter()
    eps = _threshold(s.eps if eps is None else eps)
    delta = as_fraction(s.delta if delta is None else delta)
    N, t = 1 << s.m, s.t
    total, batches = _seed_batches(s.n, t, mode, trials, prng_seed, budget)
    fails = np.zeros(len(sequences), dtype=np.int64)
    cols = np.arange(t)[None, :]
    for words in batches:
        pts = s.points_batch(words).astype(np.int64)
        for j, seq in enumerate(sequences):
            # Common scale so mixed kinds compare exactly.
            sums = seq.tables()[cols, pts].sum(axis=1)
            diff = N * sums - int(seq.totals().sum())
            fails[j] += int(_exceeds(diff, t * N * seq.scale, eps).sum())
    family = {"sequences": [seq.to_dict() for seq in sequences]}
    return VerificationReport(
        s.spec.to_dict(), family, mode, total, [int(f) for f in fails], delta, eps, time.perf_counter() - start
    )


# ---------------------------------------------------------------------------
# matrix failure rates


def matrix_failure_rate(
    ms: Sampler,
    fam: TestFunctionFamily,
    mode: str = "monte_carlo",
    trials: int | None = None,
    prng_seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    eps=None,
    delta=None,
) -> VerificationReport:
    """Fraction of seeds with ``||mean_i f(Z_i) - E f|| > eps`` in spectral norm.

    Scalar families are treated as 1x1 matrices.
    """
    if fam.m != ms.m:
        raise SpecInvalid(f"family is on {fam.m} bits, sampler on {ms.m}")
    start = time.perf_counter()
    eps = _threshold(ms.eps if eps is None else eps)
    delta = as_fraction(ms.delta if delta is None else delta)
    tab = fam.tables()
    if not fam.is_matrix:
        tab = (tab.astype(np.float64) / fam.scale)[..., None, None].astype(np.complex128)
    F, N, D = tab.shape[0], tab.shape[1], tab.shape[2]
    means = tab.mean(axis=1)
    flat = tab.reshape(F, N, D * D)
    total, batches = _seed_batches(ms.n, ms.t, mode, trials, prng_seed, budget)
    fails = np.zeros(F, dtype=np.int64)
    limit = float(eps) + NORM_SLACK
    for words in batches:
        pts = ms.points_batch(words).astype(np.int64)
        S = pts.shape[0]
        offsets = (np.arange(S, dtype=np.int64) * N)[:, None]
        hist = np.bincount((pts + offsets).ravel(), minlength=S * N).reshape(S, N).astype(np.float64)
        hist /= ms.t
        for j in range(F):
            emp = (hist @ flat[j]).reshape(S, D, D) - means[j]
            fails[j] += int((spectral_norms(emp, hermitian=fam.hermitian) > limit).sum())
    return VerificationReport(
        ms.spec.to_dict(), fam.to_dict(), mode, total, [int(f) for f in fails], delta, eps, time.perf_counter() - start
    )


# ---------------------------------------------------------------------------
# concentration and moment oracles


def concentration_check(
    t: int,
    m: int,
    ell: int,
    gamma,
    eps,
    generator,
    fam: TestFunctionFamily | None = None,
    budget: int = DEFAULT_BUDGET,
) -> dict:
    """Exact failure probabilities of a generator against the two-term tail bound.

    For every function in ``fam`` and every seed of ``generator`` the event
    ``|mean_i f(Z_i) - E f| > eps`` is counted; the rate must not exceed
    ``min(1, (25 ell / (eps^2 t))^(ell/2) + gamma / eps^ell)``.
    """
    if generator.t != t or generator.m != m:
        raise SpecInvalid("generator shape disagrees with (t, m)")
    if generator.seed_bits > 62 or (1 << generator.seed_bits) > budget:
        raise BudgetExceeded(f"2^{generator.seed_bits} seeds exceed budget {budget}")
    eps = as_fraction(eps)
    term1, term2 = concentration_terms(ell, t, eps, gamma)
    bound = min(Fraction(1), term1 + term2)
    fam = fam or TestFunctionFamily("random_balanced", m, count=20)
    tab, totals = fam.tables(), fam.totals()
    N = 1 << m
    total = 1 << generator.seed_bits
    fails = np.zeros(fam.count, dtype=np.int64)
    per = max(1, _CHUNK_CELLS // t)
    for start in range(0, total, per):
        words = np.arange(start, min(start + per, total), dtype=U64).reshape(-1, 1)
        pts = generator.generate_batch(words).astype(np.int64)
        for j in range(fam.count):
            sums = tab[j][pts].sum(axis=1)
            fails[j] += int(_exceeds(N * sums - t * totals[j], t * N * fam.scale, eps).sum())
    rates = [Fraction(int(f), total) for f in fails]
    violations = sum(r > bound for r in rates)
    return {
        "t": t, "m": m, "ell": ell, "gamma": str(as_fraction(gamma)), "eps": str(eps),
        "terms": [str(term1), str(term2)], "bound": str(bound), "vacuous": bound >= 1,
        "rates": [str(r) for r in rates], "max_rate": str(max(rates)),
        "violations": violations, "pass": violations == 0,
    }


def mz_constant(p: int) -> float:
    """``(3 sqrt 2)^p p^(p/2)``."""
    return (3 * math.sqrt(2)) ** p * p ** (p / 2)


def _exact_rademacher_abs_moment(n: int, p: int) -> Fraction:
    """``E|sum of n Rademacher signs|^p`` from the binomial distribution."""
    return Fraction(sum(math.comb(n, k) * abs(n - 2 * k) ** p for k in range(n + 1)), 1 << n)


def mz_oracle(p: int, n: int, trials: int = 100_000, prng_seed: int = 0, variables: str = "rademacher") -> dict:
    """Check ``E|sum X_i|^p <= C(p) n^(p/2 - 1) sum E|X_i|^p`` for mean-zero ``|X_i| <= 1``.

    Rademacher variables are checked exactly and by Monte Carlo; ``uniform``
    (on [-1, 1]) only by Monte Carlo, using the closed form ``E|X|^p = 1/(p+1)``.

    Raises:
        BadP: if ``p`` is not an even integer at least 2.
    """
    if not isinstance(p, (int, np.integer)) or p < 2 or p % 2:
        raise BadP(f"p must be an even integer >= 2, got {p!r}")
    if n < 1:
        raise SpecInvalid("n must be positive")
    C = mz_constant(p)
    rng = _rng(prng_seed)
    if variables == "rademacher":
        X = rng.integers(0, 2, size=(trials, n)) * 2 - 1
        single = 1.0
    elif variables == "uniform":
        X = rng.uniform(-1.0, 1.0, size=(trials, n))
        single = 1.0 / (p + 1)
    else:
        raise SpecInvalid(f"unknown variables {variables!r}")
    vals = np.abs(X.sum(axis=1).astype(np.float64)) ** p
    est = float(vals.mean())
    upper = est + 2.326 * float(vals.std(ddof=1)) / math.sqrt(trials) if trials > 1 else est
    rhs = C * n ** (p / 2 - 1) * n * single
    out: dict[str, Any] = {
        "p": p, "n": n, "variables": variables, "C": C, "rhs": rhs,
        "mc_estimate": est, "mc_upper99": upper, "trials": trials,
    }
    ok = upper <= rhs
    if variables == "rademacher":
        exact = _exact_rademacher_abs_moment(n, p)
        out["exact"] = str(exact)
        ok = ok and float(exact) <= rhs
    out["pass"] = ok
    return out


# ---------------------------------------------------------------------------
# randomness audit


def randomness_audit(s: Sampler, tape_bits: int | None = None, prng_seed: int = 0) -> AuditResult:
    """Evaluate every index once on a fresh random tape and check the bit count.

    The audit passes iff no draw overruns the tape and the cursor ends at
    exactly ``n``. ``tape_bits`` shortens or lengthens the tape for fault
    injection. Failures are reported, never raised.
    """
    bits = s.n if tape_bits is None else int(tape_bits)
    words = seed_words(max(bits, 1), 1, _rng(prng_seed))[0]
    value = int.from_bytes(words.tobytes(), "little") & ((1 << bits) - 1)
    ledger = SeedLedger(BitString(value, bits))
    checked = 0
    try:
        seed = s.read_seed(ledger)
        if s.t <= MAX_MATERIALIZED:
            checked = len(s.points(seed))
        else:
            step = MAX_MATERIALIZED
            for lo in range(0, s.t, step):
                checked += len(s.points_at(seed, np.arange(lo, min(lo + step, s.t), dtype=U64)))
    except TapeExhausted as exc:
        return AuditResult(False, s.n, ledger.cursor, bits, list(ledger.draws), checked, str(exc))
    ok = ledger.cursor == s.n and checked == s.t
    err = None if ok else f"cursor {ledger.cursor} after evaluating {checked} of {s.t} points; declared n = {s.n}"
    return AuditResult(ok, s.n, ledger.cursor, bits, list(ledger.draws), checked, err)
