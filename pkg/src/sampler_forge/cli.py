"""Command-line interface: ``sampler-forge plan|gen|verify|extract|encode|audit``.

Every subcommand reads a JSON config of the form::

    {"construction": {"name": "pairwise", "m": 6, "delta": "1/10", "eps": "1/4"},
     "family": {"kind": "random_balanced", "m": 6, "count": 20},
     "mode": "exhaustive", "trials": null, "prng_seed": 0, "budget": 16777216}

``verify`` also accepts ``eps`` and ``delta`` to check against thresholds other
than the declared ones, ``strong`` to test function sequences and ``audit``
(default true) to attach a randomness audit.

Exit codes: 0 when every verdict passes, 1 when any fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .bitcore import BitString
from .compose import (
    iterate_matrix,
    matrix_compose,
    preset_low_randomness,
    preset_optimal_samples,
    reduction_build,
    seed_compose,
    strong_compose,
)
from .derive import binary_code_sampler, sampler_to_code, sampler_to_extractor
from .errors import SamplerForgeError
from .matrix import entry_lift, matrix_ellwise_plan, matrix_ellwise_sampler
from .samplers import (
    Sampler,
    check_provenance,
    ellwise_plan,
    ellwise_sampler,
    full_independence_sampler,
    hash_outer_sampler,
    pairwise_sampler,
)
from .verify import (
    MATRIX_KINDS,
    TestFunctionFamily,
    failure_rate,
    matrix_failure_rate,
    randomness_audit,
    strong_failure_rate,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or config; maps to exit code 2."""


def _num(v: Any) -> Fraction | float:
    """Config numbers: ``"1/4"`` and ints are exact, other floats stay floats."""
    if isinstance(v, bool) or v is None:
        raise UsageError(f"expected a number, got {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v) if v.is_integer() else v
    try:
        return Fraction(str(v))
    except ValueError as exc:
        raise UsageError(f"not a number: {v!r}") from exc


def _get(cfg: dict, key: str, default: Any = ...) -> Any:
    if key in cfg:
        return cfg[key]
    if default is ...:
        raise UsageError(f"construction {cfg.get('name')!r} needs {key!r}")
    return default


def _build_pairwise(c):
    t = c.get("t")
    return pairwise_sampler(int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps")), None if t is None else int(t))


def _build_ellwise(c):
    plan = ellwise_plan(
        int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps")), _num(_get(c, "s")),
        int(c.get("const", 50)), bool(c.get("pad_pow2", False)),
    )
    return ellwise_sampler(plan)


def _build_matrix_ellwise(c):
    plan = matrix_ellwise_plan(
        int(_get(c, "m")), int(_get(c, "d")), _num(_get(c, "delta")), _num(_get(c, "eps")), _num(_get(c, "s")),
        bool(c.get("hermitian", True)), bool(c.get("pad_pow2", False)),
    )
    return matrix_ellwise_sampler(plan)


def _pair(fn):
    return lambda c: fn(build_sampler(_get(c, "outer")), build_sampler(_get(c, "inner")))


BUILDERS: dict[str, Callable[[dict], Sampler]] = {
    "full_independence": lambda c: full_independence_sampler(int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps"))),
    "pairwise": _build_pairwise,
    "ellwise": _build_ellwise,
    "hash": lambda c: hash_outer_sampler(int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps"))),
    "matrix_ellwise": _build_matrix_ellwise,
    "entry_lift": lambda c: entry_lift(build_sampler(_get(c, "inner")), int(_get(c, "d"))),
    "strong_compose": _pair(strong_compose),
    "seed_compose": _pair(seed_compose),
    "matrix_compose": _pair(matrix_compose),
    "reduction_build": lambda c: reduction_build(
        int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps")), _num(_get(c, "s")),
        int(c.get("const", 50)), bool(c.get("pad_pow2", False)),
    ),
    "preset_low_randomness": lambda c: preset_low_randomness(
        int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps")), float(_num(c.get("alpha", "1/2"))),
        bool(c.get("pad_pow2", False)),
    ),
    "preset_optimal_samples": lambda c: preset_optimal_samples(
        int(_get(c, "m")), _num(_get(c, "delta")), _num(_get(c, "eps")), bool(c.get("pad_pow2", False)),
    ),
    "iterate_matrix": lambda c: iterate_matrix(
        int(_get(c, "m")), int(_get(c, "d")), _num(_get(c, "delta")), _num(_get(c, "eps")),
        float(_num(c.get("alpha", "1/2"))), bool(c.get("hermitian", True)),
    ),
    "binary_code_sampler": lambda c: binary_code_sampler(_num(_get(c, "delta")), _num(_get(c, "eps")), _num(_get(c, "alpha"))),
}


def build_sampler(cfg: dict) -> Sampler:
    """Build a sampler from a ``{"name": ..., **params}`` construction config."""
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise UsageError("construction must be an object with a 'name'")
    name = cfg["name"]
    if name not in BUILDERS:
        raise UsageError(f"unknown construction {name!r}; choose from {sorted(BUILDERS)}")
    return BUILDERS[name](cfg)


# ---------------------------------------------------------------------------
# I/O helpers


def _load_config(path: str | None) -> dict:
    if path is None:
        raise UsageError("--config is required")
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict) or "construction" not in cfg:
        raise UsageError("config must be an object with a 'construction' entry")
    return cfg


def _read_bits(path: str, length: int, text: bool) -> BitString:
    """Raw little-endian bytes, or with ``text`` a string of 0/1 with bit 0 first."""
    try:
        if text:
            raw = "".join(Path(path).read_text().split())
            bits = BitString.from_str(raw)
            if bits.length < length:
                raise UsageError(f"{path} holds {bits.length} bits, need {length}")
            return bits.slice(0, length)
        return BitString.from_bytes(Path(path).read_bytes(), length)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except (ValueError, SamplerForgeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, default=str)


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    ok = check_provenance(s.spec)
    payload = {"spec": s.spec.to_dict(), "provenance_ok": ok}
    if args.format == "csv":
        sp = s.spec
        _emit(f"kind,m,t,n,delta,eps,strong,provenance_ok\n{sp.kind},{sp.m},{sp.t},{sp.n},{sp.delta},{sp.eps},{sp.strong},{ok}", args.out)
    else:
        _emit(_dumps(payload), args.out)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_gen(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    if args.seed_file is None:
        raise UsageError("gen needs --seed-file")
    seed = _read_bits(args.seed_file, s.n, args.text_bits)
    seq = s.sample(seed)
    pts = [int(p) for p in seq.points]
    if args.format == "csv":
        _emit("index,point\n" + "\n".join(f"{i},{p}" for i, p in enumerate(pts)), args.out)
    else:
        _emit(json.dumps({"m": s.m, "t": s.t, "points": pts}), args.out)
    return EXIT_PASS


def cmd_verify(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    fam_cfg = cfg.get("family")
    if not isinstance(fam_cfg, dict):
        raise UsageError("verify needs a 'family' object in the config")
    fam_cfg = dict(fam_cfg)
    fam_cfg.setdefault("m", s.m)
    fam = TestFunctionFamily.from_dict(fam_cfg)
    kw = dict(
        mode=cfg.get("mode", "exhaustive"),
        trials=cfg.get("trials"),
        prng_seed=int(cfg.get("prng_seed", 0)),
        budget=int(cfg.get("budget", 1 << 24)),
        eps=None if cfg.get("eps") is None else _num(cfg["eps"]),
        delta=None if cfg.get("delta") is None else _num(cfg["delta"]),
    )
    if args.matrix or fam.kind in MATRIX_KINDS:
        report = matrix_failure_rate(s, fam, **kw)
    elif cfg.get("strong"):
        seqs = [TestFunctionFamily(fam.kind, fam.m, s.t, fam.prng_seed + j, fam.params) for j in range(fam.count)]
        report = strong_failure_rate(s, seqs, **kw)
    else:
        report = failure_rate(s, fam, **kw)
    if cfg.get("audit", True):
        report.audit = randomness_audit(s, prng_seed=kw["prng_seed"])
    summary = report.to_dict()
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
        summary.pop("functions")
        sys.stderr.write(_dumps(summary) + "\n")
    else:
        _emit(_dumps(summary), args.out)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _sidecar(args, payload: dict) -> None:
    text = _dumps(payload)
    if args.spec_out:
        Path(args.spec_out).write_text(text + "\n")
    else:
        sys.stderr.write(text + "\n")


def cmd_extract(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    spec, ext = sampler_to_extractor(s)
    if args.source_file is None or args.index is None:
        raise UsageError("extract needs --source-file and --index")
    x = _read_bits(args.source_file, spec.n, args.text_bits)
    y = ext(x, args.index)
    if args.format == "json":
        _emit(json.dumps({"output": str(y), "index": args.index}), args.out)
    else:
        _emit(str(y), args.out)
    _sidecar(args, {"extractor": spec.to_dict(), "sampler": s.spec.to_dict()})
    return EXIT_PASS


def cmd_encode(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    spec, code = sampler_to_code(s)
    if args.message_file is None:
        raise UsageError("encode needs --message-file")
    x = _read_bits(args.message_file, spec.n, args.text_bits)
    word = code.encode(x)
    if args.format == "json":
        _emit(json.dumps({"codeword": str(word)}), args.out)
    else:
        _emit(str(word), args.out)
    _sidecar(args, {"code": spec.to_dict(), "sampler": s.spec.to_dict()})
    return EXIT_PASS


def cmd_audit(args, cfg) -> int:
    s = build_sampler(cfg["construction"])
    res = randomness_audit(s, prng_seed=int(cfg.get("prng_seed", 0)))
    payload = {"spec": s.spec.to_dict(), "audit": res.to_dict(), "provenance_ok": check_provenance(s.spec)}
    if args.format == "csv":
        _emit(f"passed,n,cursor,points_checked\n{res.passed},{res.n},{res.cursor},{res.points_checked}", args.out)
    else:
        _emit(_dumps(payload), args.out)
    return EXIT_PASS if res.passed and payload["provenance_ok"] else EXIT_FAIL


COMMANDS = {
    "plan": cmd_plan,
    "gen": cmd_gen,
    "verify": cmd_verify,
    "extract": cmd_extract,
    "encode": cmd_encode,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampler-forge", description="Averaging and matrix samplers with a verification harness.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--text-bits", action="store_true", help="bit files hold 0/1 text, bit 0 first")
        if name == "gen":
            p.add_argument("--seed-file", help="seed bits, raw little-endian bytes by default")
        if name == "verify":
            p.add_argument("--matrix", action="store_true", help="measure failures in spectral norm")
        if name == "extract":
            p.add_argument("--source-file", help="source bits")
            p.add_argument("--index", type=int, help="extractor seed as a sample index")
        if name == "encode":
            p.add_argument("--message-file", help="message bits")
        if name in ("extract", "encode"):
            p.add_argument("--spec-out", help="write the derived spec here instead of stderr")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, SamplerForgeError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(f"sampler-forge: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
