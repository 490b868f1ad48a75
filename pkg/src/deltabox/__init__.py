"""Spectral simulator for quantum decay from a box through two unequal delta barriers."""

from .dynamics import (
    ProbabilityTrace,
    TimeGrid,
    compute_trace,
    currents,
    probabilities,
    reflection_horizon,
)
from .errors import (
    ConfigError,
    DegenerateNullSpace,
    DeltaboxError,
    NonExponentialWindow,
    NonPositiveProbability,
    NonSimpleRoot,
    NormDrift,
    NumericalError,
    OutOfDomain,
    PlateauNotFound,
    RootCountMismatch,
    SumRuleViolation,
    WindowTooShort,
)
from .fitting import (
    FitResult,
    FitWindow,
    SweepRow,
    auto_window,
    fit_partials,
    fit_survival,
    fit_trace,
    oscillation_peak_spacing,
    sweep_beta,
)
from .oracle import GridConfig, OracleTrace, compare_with_spectral, propagate
from .overlaps import OverlapSet, alpha_coeffs, build_overlap_set, sinusoid_overlap
from .spectral import (
    BarrierConfig,
    EigenMode,
    Spectrum,
    build_mode,
    eval_mode,
    find_roots,
    matching_matrix,
    solve_spectrum,
)

__version__ = "0.1.0"
