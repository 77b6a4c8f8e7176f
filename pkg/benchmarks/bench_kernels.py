"""Time the compiled kernels against the numpy fallback on identical inputs.

Usage:
    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from sampler_forge import kernels
from sampler_forge._bits import U64, mask
from sampler_forge.bitcore import irreducible_modulus


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng: np.random.Generator) -> dict:
    """name -> (callable taking a backend module, short description)."""
    w = 16
    poly = irreducible_modulus(w)
    a = rng.integers(0, 1 << w, size=200_000, dtype=U64)
    b = rng.integers(0, 1 << w, size=200_000, dtype=U64)

    coeffs = rng.integers(0, 1 << 20, size=(512, 6), dtype=U64)
    poly20 = irreducible_modulus(20)
    alphas = np.arange(1024, dtype=U64)

    xs = rng.integers(0, 1 << 40, size=256, dtype=U64)
    ys = rng.integers(0, 1 << 55, size=(256, 1024), dtype=U64)

    k = 61
    red = irreducible_modulus(k) ^ (1 << k)
    S = 64
    x_lo = rng.integers(0, 1 << k, size=S, dtype=U64)
    y_lo = rng.integers(0, 1 << k, size=S, dtype=U64)
    zeros = np.zeros(S, dtype=U64)

    taps = np.array([1, 5, 17, 40, 63], dtype=np.int64)
    L = 63
    seed_words = rng.integers(0, 1 << 63, size=L, dtype=U64)

    def lfsr(mod):
        words = np.zeros(1 << 20, dtype=U64)
        words[:L] = seed_words
        mod.lfsr_extend(words, taps, L, L)
        return words

    return {
        "gf_mul_array (w=16, 2e5 products)": lambda mod: mod.gf_mul_array(a, b, w, poly),
        "poly_eval_batch (512 seeds x 1024 points, deg 5)": lambda mod: mod.poly_eval_batch(coeffs, 20, poly20, alphas, 8),
        "toeplitz_batch (256 seeds x 1024 keys, n_x=40)": lambda mod: mod.toeplitz_batch(xs, ys, 40, 16),
        "small_bias_words_batch (64 seeds, k=61, 256 words)": lambda mod: mod.small_bias_words_batch(
            x_lo, zeros, y_lo, zeros, k, red & mask(64), red >> 64, 256
        ),
        "lfsr_extend (2^20 words, 5 taps)": lfsr,
    }


def run(repeat: int = 3, prng_seed: int = 0) -> list[dict]:
    backends = kernels.available_backends()
    cases = _cases(np.random.Generator(np.random.Philox(prng_seed)))
    rows = []
    for name, fn in cases.items():
        row = {"kernel": name}
        outputs = {}
        for bname, mod in backends.items():
            outputs[bname] = fn(mod)
            row[bname] = _best_of(lambda: fn(mod), repeat)
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
            row["agree"] = bool(np.array_equal(outputs["python"], outputs["compiled"]))
        rows.append(row)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", help="also write results here")
    args = parser.parse_args()
    rows = run(args.repeat)
    print(f"{'kernel':52s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for r in rows:
        comp = f"{r['compiled']:11.4f}" if "compiled" in r else f"{'n/a':>11s}"
        speed = f"{r['speedup']:7.1f}x" if "speedup" in r else f"{'':>8s}"
        print(f"{r['kernel']:52s} {r['python']:10.4f} {comp} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
