"""Generation sets, toy-model cascade dynamics and resonant-truncation
experiments for the quintic NLS on the two-dimensional torus."""

from .lattice import (
    Family,
    GenerationSet,
    IncompleteSetError,
    LatticePoint,
    StructuralError,
    pt,
)
from .resonance import (
    CoefficientVector,
    NondegeneracyReport,
    check_nondegeneracy,
    classify_resonant_vector,
    complete_quintuple,
    enumerate_resonant_vectors,
    family_rank_check,
    family_vectors,
    is_action_preserving,
    is_complete,
    is_resonance,
    verify_small_support_classification,
)
from .genset import (
    build_combinatorial_model,
    build_for_target,
    build_generation_set,
    check_norm_explosion,
    dilate_to_integers,
    perturb_to_nondegenerate,
    prototype_embedding,
    rational_circle_point,
)
from .hamiltonian import (
    PolynomialHamiltonian,
    diagonal_restriction,
    frakS3_constraint,
    hacca_polynomial,
    hamish_polynomial,
    polar_form,
    restricted_hamiltonian,
)
from .toy import (
    Trajectory,
    heteroclinic_2g,
    integrate,
    periodic_orbit,
    phase_portrait_2g,
    toy_hamiltonian,
    toy_vector_field,
)
from .localframe import (
    LocalState,
    TargetSpec,
    from_local,
    kappa,
    linearization_spectrum,
    slider_shoot,
    target_membership,
    to_local,
    verify_slider,
)
from .galerkin import (
    FourierState,
    approximation_experiment,
    build_initial_data,
    error_term,
    integrate_full_nls,
    integrate_resonant,
    multilinear_N,
    sobolev_norm,
)
from .reduced import (
    frakS2_system,
    frakS3_system,
    no_full_transfer_scan,
    phase_portrait,
    rectangle_full_transfer,
)

__version__ = "0.1.0"
