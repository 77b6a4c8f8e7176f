"""Randomness-efficient averaging and matrix samplers."""

from __future__ import annotations

from .bitcore import BitString, FieldElement, SeedLedger, gf2w_mul, inner_product_gf2, ledger_draw
from .compose import (
    iterate_matrix,
    matrix_compose,
    preset_low_randomness,
    preset_optimal_samples,
    reduction_build,
    seed_compose,
    strong_compose,
)
from .derive import (
    binary_code_sampler,
    extractor_adversarial_distance,
    list_size_at,
    sampler_to_code,
    sampler_to_extractor,
    statistical_distance,
)
from .generators import (
    AlmostKWiseGenerator,
    AlmostKWiseSpec,
    ExactKWiseGenerator,
    SampleSequence,
    almost_kwise_sample,
    exact_kwise_sample,
    marginal_distance_oracle,
    small_bias_sample,
)
from .kernels import BACKEND
from .matrix import (
    MatrixFn,
    entry_lift,
    hermitian_dilation,
    matrix_ellwise_plan,
    matrix_ellwise_sampler,
    spectral_norm,
    trace_moment_oracle,
)
from .samplers import (
    Sampler,
    SamplerSpec,
    check_provenance,
    ellwise_plan,
    ellwise_sampler,
    evaluate,
    full_independence_sampler,
    hash_outer_sampler,
    pairwise_sampler,
    rederive,
)
from .verify import (
    TestFunctionFamily,
    VerificationReport,
    concentration_check,
    failure_rate,
    matrix_failure_rate,
    mz_oracle,
    randomness_audit,
    strong_failure_rate,
)

__version__ = "0.1.0"
