"""Services package initialization."""

from .operators import (
    Operator,
    OperatorSubspace,
    Superoperator,
    hs_inner,
    hs_norm,
    vec,
    unvec,
    orthonormalize,
    span_union,
    residual,
    subspace_contains,
    subspace_equal,
    subspace_intersection,
    orthogonal_complement,
    commutant,
    choi_matrix,
    pauli_string,
    pauli_sum,
    random_density,
    random_hermitian
)
from .lindblad import (
    CoefficientDomain,
    ControlChannel,
    ControlledLindbladGenerator,
    LindbladCertificate,
    apply_generator,
    generator_superoperator,
    affine_superoperators,
    is_lindblad,
    extract_hamiltonian_and_noise,
    sample_admissible_controls
)
from .krylov import (
    ObservableSpaceReport,
    ParametricSpaceReport,
    DriftReductionCheck,
    observable_space,
    observable_space_superalg_oracle,
    observable_space_parametric,
    frame_algebra,
    check_drift_reduction,
    indistinguishable,
    non_observable_complement,
    observable_subspace
)
from .star_algebra import (
    WedderburnStructure,
    algebra_closure,
    closure_residual,
    is_star_algebra,
    center,
    wedderburn,
    verify_structure
)
from .reduction import (
    ReductionMaps,
    ProjectorReport,
    ReducedModel,
    build_reduction_maps,
    map_R,
    map_J,
    map_J_adjoint,
    map_state,
    verify_projector,
    reduce_generator
)
from .propagation import (
    ControlSchedule,
    Trajectory,
    PropagationModel,
    ComparisonOutcome,
    propagate_heisenberg,
    expectation_trajectory,
    compare_full_reduced,
    random_schedule,
    random_states
)
from .central_spin import (
    DISSIPATION_AXES,
    DISSIPATION_MODES,
    CentralSpinParameters,
    generate_central_spin,
    central_spin_betas,
    bath_state_index,
    analytic_central_spin
)
from .model_io import (
    ParsedModel,
    LoadedReducedModel,
    parse_model,
    serialize_model,
    model_fingerprint,
    parse_schedule,
    serialize_schedule,
    parse_state,
    serialize_state,
    load_reduced_model,
    read_trajectories,
    write_trajectories,
    write_json
)
from .reduction_service import ReductionService, ReductionOutcome, CheckOutcome, get_reduction_service
from .simulation_service import SimulationService, SimulationTarget, get_simulation_service
from .report_renderer import ReportRenderer, get_report_renderer

__all__ = [
    # Operator core
    "Operator",
    "OperatorSubspace",
    "Superoperator",
    "hs_inner",
    "hs_norm",
    "vec",
    "unvec",
    "orthonormalize",
    "span_union",
    "residual",
    "subspace_contains",
    "subspace_equal",
    "subspace_intersection",
    "orthogonal_complement",
    "commutant",
    "choi_matrix",
    "pauli_string",
    "pauli_sum",
    "random_density",
    "random_hermitian",

    # Lindblad model
    "CoefficientDomain",
    "ControlChannel",
    "ControlledLindbladGenerator",
    "LindbladCertificate",
    "apply_generator",
    "generator_superoperator",
    "affine_superoperators",
    "is_lindblad",
    "extract_hamiltonian_and_noise",
    "sample_admissible_controls",

    # Krylov observable spaces
    "ObservableSpaceReport",
    "ParametricSpaceReport",
    "DriftReductionCheck",
    "observable_space",
    "observable_space_superalg_oracle",
    "observable_space_parametric",
    "frame_algebra",
    "check_drift_reduction",
    "indistinguishable",
    "non_observable_complement",
    "observable_subspace",

    # *-algebras
    "WedderburnStructure",
    "algebra_closure",
    "closure_residual",
    "is_star_algebra",
    "center",
    "wedderburn",
    "verify_structure",

    # Reduction
    "ReductionMaps",
    "ProjectorReport",
    "ReducedModel",
    "build_reduction_maps",
    "map_R",
    "map_J",
    "map_J_adjoint",
    "map_state",
    "verify_projector",
    "reduce_generator",

    # Propagation
    "ControlSchedule",
    "Trajectory",
    "PropagationModel",
    "ComparisonOutcome",
    "propagate_heisenberg",
    "expectation_trajectory",
    "compare_full_reduced",
    "random_schedule",
    "random_states",

    # Central spin
    "DISSIPATION_AXES",
    "DISSIPATION_MODES",
    "CentralSpinParameters",
    "generate_central_spin",
    "central_spin_betas",
    "bath_state_index",
    "analytic_central_spin",

    # File IO
    "ParsedModel",
    "LoadedReducedModel",
    "parse_model",
    "serialize_model",
    "model_fingerprint",
    "parse_schedule",
    "serialize_schedule",
    "parse_state",
    "serialize_state",
    "load_reduced_model",
    "read_trajectories",
    "write_trajectories",
    "write_json",

    # Workflows
    "ReductionService",
    "ReductionOutcome",
    "CheckOutcome",
    "get_reduction_service",
    "SimulationService",
    "SimulationTarget",
    "get_simulation_service",
    "ReportRenderer",
    "get_report_renderer"
]
