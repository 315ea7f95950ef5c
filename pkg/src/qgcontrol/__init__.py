"""Spectra, gap certificates, moment-problem control synthesis and Galerkin
propagation for Laplacians on compact metric graphs."""

__version__ = "0.1.0"

from .graphs import (
    Edge,
    EdgeLength,
    GraphError,
    MetricGraph,
    VertexKind,
    build_graph,
    classify_vertices,
    disjoint_intervals,
    graph_to_doc,
    interval,
    load_graph,
    ratio_analysis,
    save_graph,
    star,
    tadpole,
    total_length,
)
from .spectra import (
    EigenPair,
    SpectralBasis,
    SpectralError,
    closed_form_spectrum,
    compute_spectrum,
    expand_spectrum,
    secular_determinant,
    star_normalization,
    weyl_fit,
)
from .gaps import (
    ClassPartition,
    GapHypothesisError,
    GapReport,
    collapse_multiplicities,
    dirichlet_cross_family_gap,
    fit_gap_constants,
    neumann_star_secular_roots,
    partition_classes,
    small_divisor_check,
)
from .fields import (
    ControlField,
    ControlMatrix,
    EdgeField,
    FieldError,
    coupling_decay_fit,
    field_from_doc,
    matrix_elements,
    perturbed_spectrum,
    resonance_collision_check,
)
from .moments import (
    ControlSignal,
    DividedDifferenceBlock,
    MomentError,
    MomentProblem,
    apply_blocks,
    build_blocks,
    moment_bound_constant,
    solve_moments,
)
from .dynamics import (
    StateVector,
    Trajectory,
    duhamel_residual,
    graded_norm,
    lambda_graded_norm,
    propagate,
)
from .steering import (
    LieGeneratorSet,
    SteeringError,
    SteeringProblem,
    lie_rank,
    linearized_control,
    resonant_pairs,
    rotation_factorization,
    steer,
)
