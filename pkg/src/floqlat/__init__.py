"""Numerics for time-periodic Hamiltonians on periodic graphs.

Magnetic Laplacians and their Bloch band structures, driven propagators and
monodromy/quasienergy spectra, the mode realization of the quasienergy space,
gauge transforms absorbing mean-zero oscillating potentials, and wave-operator
scattering diagnostics on finite truncations.
"""

__version__ = "0.1.0"

from .errors import FloqlatError
from .lattice import (
    FiniteLattice,
    PeriodicGraph,
    StateVector,
    boundary_mass,
    build_periodic_graph,
    hypercubic,
    truncate,
)
from .spectral import (
    BandStructure,
    StaticElectricPotential,
    StaticMagneticPotential,
    band_structure,
    detect_flat_bands,
    fiber_operator,
    magnetic_laplacian,
    schrodinger,
)
from .driving import (
    PrimitiveQ,
    TimeField,
    check_condition,
    magnetic_difference,
    primitive_of,
)
from .evolution import (
    DrivenHamiltonian,
    Propagator,
    QuasienergySpectrum,
    autonomous,
    dyson_propagator,
    floquet_mode_check,
    monodromy,
    propagate,
    propagator_matrix,
    quasienergy_spectrum,
)
from .gauge import GaugeTransform, commutator_K, gauge_equivalence_check, gauge_transform
from .howland import (
    HowlandVector,
    free_quasienergy_spectrum,
    free_resolvent_kernel,
    free_resolvent_modes,
)
from .scattering import (
    ScatteringConfig,
    ScatteringReport,
    adjoint_wave_probe,
    gaussian_packet,
    time_decaying_scenario,
    wave_operator_apply,
    weighted_resolvent_sample,
)

__all__ = [
    "__version__",
    "FloqlatError",
    "PeriodicGraph",
    "FiniteLattice",
    "StateVector",
    "build_periodic_graph",
    "hypercubic",
    "truncate",
    "boundary_mass",
    "StaticMagneticPotential",
    "StaticElectricPotential",
    "magnetic_laplacian",
    "schrodinger",
    "fiber_operator",
    "band_structure",
    "detect_flat_bands",
    "BandStructure",
    "TimeField",
    "PrimitiveQ",
    "primitive_of",
    "check_condition",
    "magnetic_difference",
    "DrivenHamiltonian",
    "autonomous",
    "Propagator",
    "propagate",
    "propagator_matrix",
    "monodromy",
    "dyson_propagator",
    "QuasienergySpectrum",
    "quasienergy_spectrum",
    "floquet_mode_check",
    "GaugeTransform",
    "gauge_transform",
    "commutator_K",
    "gauge_equivalence_check",
    "HowlandVector",
    "free_resolvent_modes",
    "free_resolvent_kernel",
    "free_quasienergy_spectrum",
    "ScatteringConfig",
    "ScatteringReport",
    "gaussian_packet",
    "wave_operator_apply",
    "adjoint_wave_probe",
    "time_decaying_scenario",
    "weighted_resolvent_sample",
]
