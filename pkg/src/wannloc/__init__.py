"""Generalized Wannier bases on discretized boxes: localization and locality.

The package builds orthonormal families localized around uniformly discrete
point sets, intertwines them against extremely localized reference bases,
and quantifies how truncation of the intertwiner trades locality against
operator-norm error.  Gapped model Hamiltonians (periodic square wells and
their bi-Lipschitz deformations) supply the nontrivial families.
"""

from .discrete_sets import (
    UniformlyDiscreteSet,
    deformed_lattice,
    lattice,
    load_discrete_set,
    max_discreteness_radius,
    pairwise_min_distance,
    perturbed_lattice,
    restrict_to_box,
    save_discrete_set,
    verify_uniform_discreteness,
)
from .grid import (
    EscapedMassError,
    Grid,
    GridFunction,
    GridMismatchError,
    MultiplicationOperator,
    ensure_mass_contained,
    inner_product,
    load_grid_function,
    multiplication_operator,
    restrict_to_ball,
    save_grid_function,
)
from .localization import (
    FrameDegenerateError,
    LocalizationCertificate,
    WannierFamily,
    build_extremely_localized_family,
    build_power_law_family,
    certify_exponential,
    certify_s_localized,
    exponential_moment,
    localization_moment,
    power_bound_from_exponential,
)
from .models import (
    DeformationResult,
    GubanovMap,
    Hamiltonian,
    SpectralIsland,
    apply_Y,
    build_deformed_hamiltonian,
    build_gubanov,
    build_kronig_penney,
    deform_gwb,
    extract_gwb,
    find_spectral_islands,
    spectral_projection,
    subfamily,
    wannier_from_projection,
)
from .roe_ops import (
    ConvolutionOperator,
    DecayFit,
    RankOneSumOperator,
    build_intertwiner,
    decay_fit,
    first_clean_separation,
    norm_of_difference,
    power_iteration_norm,
    probe_local_compactness,
    probe_propagation,
    projection_from_family,
    propagation_profile,
    truncate_intertwiner,
)
from .series_bounds import (
    LemmaCheck,
    TailSumReport,
    default_epsilon,
    lemma_check,
    lemma_constant,
    tail_exponent_fit,
    tail_sum,
    verify_lemma,
)

__version__ = "0.1.0"

__all__ = [
    "ConvolutionOperator",
    "DecayFit",
    "DeformationResult",
    "EscapedMassError",
    "FrameDegenerateError",
    "Grid",
    "GridFunction",
    "GridMismatchError",
    "GubanovMap",
    "Hamiltonian",
    "LemmaCheck",
    "LocalizationCertificate",
    "MultiplicationOperator",
    "RankOneSumOperator",
    "SpectralIsland",
    "TailSumReport",
    "UniformlyDiscreteSet",
    "WannierFamily",
    "apply_Y",
    "build_deformed_hamiltonian",
    "build_extremely_localized_family",
    "build_gubanov",
    "build_intertwiner",
    "build_kronig_penney",
    "build_power_law_family",
    "certify_exponential",
    "certify_s_localized",
    "decay_fit",
    "default_epsilon",
    "deform_gwb",
    "deformed_lattice",
    "ensure_mass_contained",
    "exponential_moment",
    "extract_gwb",
    "find_spectral_islands",
    "first_clean_separation",
    "inner_product",
    "lattice",
    "lemma_check",
    "lemma_constant",
    "load_discrete_set",
    "load_grid_function",
    "localization_moment",
    "max_discreteness_radius",
    "multiplication_operator",
    "norm_of_difference",
    "pairwise_min_distance",
    "perturbed_lattice",
    "power_bound_from_exponential",
    "power_iteration_norm",
    "probe_local_compactness",
    "probe_propagation",
    "projection_from_family",
    "propagation_profile",
    "restrict_to_ball",
    "restrict_to_box",
    "save_discrete_set",
    "save_grid_function",
    "spectral_projection",
    "subfamily",
    "tail_exponent_fit",
    "tail_sum",
    "truncate_intertwiner",
    "verify_lemma",
    "verify_uniform_discreteness",
    "wannier_from_projection",
]
