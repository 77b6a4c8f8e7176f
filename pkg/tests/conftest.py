from __future__ import annotations

import pytest

from sampler_forge import kernels

BACKENDS = sorted(kernels.available_backends())
_EXPORTS = ("gf_mul", "gf_mul_array", "poly_eval_batch", "toeplitz_batch", "lfsr_extend", "small_bias_words_batch")


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    mod = kernels.available_backends()[request.param]
    for name in _EXPORTS:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    monkeypatch.setattr(kernels, "BACKEND", mod.BACKEND)
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
