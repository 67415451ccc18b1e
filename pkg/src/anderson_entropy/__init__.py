"""Entanglement entropy bounds for free fermions in random potentials.

The package builds Anderson Hamiltonians on hypercubic lattices, computes
ground-state or thermal correlation matrices, and evaluates the entanglement
entropy of a cubic subsystem together with computable lower and upper bounds.
Ensemble tooling collects these quantities over disorder realizations and
tests area-law scaling, exponential decay of correlations and the spread of
the entropy distribution.
"""

__version__ = "0.1.0"

from .errors import (
    AndersonEntropyError,
    BoundViolationError,
    ConfigError,
    InsufficientDataError,
    NumericalDefectError,
    SpectralError,
)
from .lattice import (
    AndersonModel,
    Boundary,
    LatticeSpec,
    PotentialKind,
    PotentialModel,
    assemble,
    build_laplacian,
    make_rng,
    sample_potential,
    shift_potential,
)
from .spectral import (
    CorrelationMatrix,
    SpectralData,
    eigendecompose,
    fermi_projector,
    integrated_dos,
    thermal_correlation,
    windowed_correlation,
)
from .entropy import (
    BoundaryTerms,
    EntropyReport,
    SubsystemCorrelation,
    binary_entropy,
    boundary_terms_1d,
    entanglement_entropy,
    entropy_report,
    fermi_momentum,
    lower_bound,
    peierls_upper,
    renyi_entropy,
    restrict,
    ti_projector,
    tightened_upper,
    upper_bound,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    EnsembleStats,
    aggregate,
    compute_c_bounds,
    estimate_pi,
    fit_localization,
    histogram,
    realization_seed,
    realize,
    run_ensemble,
    shared_histograms,
)
from .analysis import (
    ScalingFit,
    convolution_check,
    fit_scaling,
    ks_critical_value,
    ks_statistic,
    overlap_test,
    preferred_model,
    saturation_test,
    thermal_volume_check,
)
