"""Differentially private spectral approximation with coherence-aware noise."""

__version__ = "0.1.0"

from .coherence import CoherenceReport, coherence_report, mu, mu0, mu_k
from .deflation import (
    RankKResult,
    coherence_growth_check,
    deflation_interlacing_check,
    rank_k_approx,
    rayleigh_admissible,
    rayleigh_lower,
    split_budget,
)
from .errors import (
    ConvergenceError,
    DegenerateIterateError,
    DimensionError,
    DpSpectraError,
    OverflowRiskError,
    ParseError,
    PreconditionError,
)
from .lowerbound import LowerBoundInstance, attack_demo, gen_database, gen_instance, quality, reconstruct
from .matrix import (
    RectMatrix,
    SpectralFactorization,
    SymmetricMatrix,
    dilate,
    exact_factorization,
    jacobi_eigh,
    matvec,
    spectral_norm,
)
from .mmio import ingest
from .power import (
    AdversarialScript,
    GaussianNoise,
    IterationTrace,
    PpiConfig,
    Status,
    ZeroNoise,
    choose_T,
    ppi,
    robust_power_iteration,
    search_C,
    sign_pattern,
)
from .privacy import (
    NoiseLedger,
    PrivacyBudget,
    compose_advanced,
    compose_basic,
    gaussian_sigma,
    make_rng,
    ppi_noise_scale,
    private_sigma1_upper,
)
from .sensitivity import ProbeConfig, mu_k_power_bound, power_gap_estimate
