"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
takes over. Setting ``SAMPLER_FORGE_BACKEND=python`` forces the fallback.

Field kernels take ``w <= 63`` with the full modulus (bit ``w`` set) in one
uint64; callers route wider fields through Python integers.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("SAMPLER_FORGE_BACKEND", "").lower()

if _forced == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        if _forced == "compiled":
            raise
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
gf_mul = _impl.gf_mul
gf_mul_array = _impl.gf_mul_array
poly_eval_batch = _impl.poly_eval_batch
toeplitz_batch = _impl.toeplitz_batch
lfsr_extend = _impl.lfsr_extend
small_bias_words_batch = _impl.small_bias_words_batch


def available_backends() -> dict[str, object]:
    """Both kernel modules that can be imported in this environment."""
    out: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
