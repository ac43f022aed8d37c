"""Numerical laboratory for the measurement-induced purity transition
in all-to-all Brownian qudit circuits.

The package integrates the exact finite-N purity master equation,
solves its Hermitian tridiagonal spectral form, evaluates the large-N
continuum theory with its closed-form critical observables, follows the
cusp-formation Riccati dynamics, and cross-validates everything against
a brute-force Monte Carlo simulation of the underlying circuit.
"""

from .errors import (
    ConfigError,
    DegenerateSimilarity,
    DivergedError,
    IntegrationFailure,
    LabError,
    NumericalFailure,
    PhaseError,
    UnsupportedGrid,
)
from .evolve import (
    CuspTrace,
    EntropySeries,
    EvolveConfig,
    cusp_curvature,
    entropy_curve_series,
    entropy_density,
    step,
    trace_cusp,
)
from .largen import (
    ContinuumProfile,
    CriticalObservables,
    action_gradient,
    action_left,
    action_right,
    critical_alpha,
    critical_observables,
    curvature_smooth,
    cusp_slope,
    dfunc,
    ground_energy,
    hopping,
    one_mixed_profile,
    phase_of,
    potential,
    residual_entropy,
    saddle_points,
    stationary_entropy_curve,
)
from .mc import (
    HermitianBasis,
    MCEstimate,
    TrajectoryConfig,
    TrajectoryRecord,
    estimate_purity,
    measurement_probability,
    pauli_basis,
    run_trajectory,
    sample_step_hamiltonian,
)
from .model import (
    INITIAL_KINDS,
    ModelParams,
    PurityVector,
    TridiagonalGenerator,
    build_generator,
    initial_purity,
    reflect,
)
from .riccati import (
    RiccatiCoefficients,
    RiccatiSeries,
    analytic_u,
    coefficients,
    integrate_u,
)
from .spectral import (
    SimilarityWeights,
    SpectralDecomposition,
    SymmetricTridiagonal,
    eigendecompose,
    gap,
    hermitianize,
    project_initial,
    propagate,
    similarity_weights,
    stationary_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateSimilarity",
    "DivergedError",
    "IntegrationFailure",
    "LabError",
    "NumericalFailure",
    "PhaseError",
    "UnsupportedGrid",
    "CuspTrace",
    "EntropySeries",
    "EvolveConfig",
    "cusp_curvature",
    "entropy_curve_series",
    "entropy_density",
    "step",
    "trace_cusp",
    "ContinuumProfile",
    "CriticalObservables",
    "action_gradient",
    "action_left",
    "action_right",
    "critical_alpha",
    "critical_observables",
    "curvature_smooth",
    "cusp_slope",
    "dfunc",
    "ground_energy",
    "hopping",
    "one_mixed_profile",
    "phase_of",
    "potential",
    "residual_entropy",
    "saddle_points",
    "stationary_entropy_curve",
    "HermitianBasis",
    "MCEstimate",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "estimate_purity",
    "measurement_probability",
    "pauli_basis",
    "run_trajectory",
    "sample_step_hamiltonian",
    "INITIAL_KINDS",
    "ModelParams",
    "PurityVector",
    "TridiagonalGenerator",
    "build_generator",
    "initial_purity",
    "reflect",
    "RiccatiCoefficients",
    "RiccatiSeries",
    "analytic_u",
    "coefficients",
    "integrate_u",
    "SimilarityWeights",
    "SpectralDecomposition",
    "SymmetricTridiagonal",
    "eigendecompose",
    "gap",
    "hermitianize",
    "project_initial",
    "propagate",
    "similarity_weights",
    "stationary_entropy",
    "__version__",
]
