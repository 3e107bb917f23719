"""Sparse FIR channel-shortening design toolkit.

Design channel-shortening equalizers and short target responses by casting
both problems as sparsest approximation over interchangeable dictionaries
built from correlation-matrix factorizations, with an FFT-based circulant
fast path, coherence analysis and a reproducible Monte Carlo harness.
"""
from .signal_model import (
    Cir,
    NoiseSpec,
    ChannelMatrix,
    CorrelationSet,
    generate_updp_cir,
    build_channel_matrix,
    build_correlations,
)
from .spectral_factors import (
    FactorizationError,
    SqrtFactor,
    CirculantSpectrum,
    cholesky_factor,
    ldl_factor,
    eigen_factor,
    circulant_ryy_spectrum,
    circulant_rdelta_spectrum,
    circulant_apply,
    circulant_apply_inverse,
    circulant_dense,
    circulant_factor,
)
from .mmse_core import (
    Tir,
    Cse,
    MseReport,
    optimal_unit_tap,
    optimal_tir,
    tir_mse,
    optimal_cse,
    cse_mse,
    shortening_snr,
    loss_budget,
)
from .sparse_engine import (
    SparseProblem,
    SparseSolution,
    build_tir_problem,
    build_cse_problem,
    omp_solve,
    exhaustive_sparsest,
    assemble_sparse_tir,
    assemble_sparse_cse,
    significant_taps_baseline,
    omp_backend,
)
from .coherence_lab import (
    CoherenceReport,
    TridiagEigen,
    worst_case_coherence,
    tridiag_ones_eigen,
    worst_case_cir,
    coherence_vs_snr_profile,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentSummary,
    EXPERIMENTS,
    default_config,
    run_experiment,
)

__version__ = "0.1.0"
