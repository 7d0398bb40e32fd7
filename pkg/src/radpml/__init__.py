"""radpml — radial complex-scaling resonance solver for anisotropic exterior domains.

The package computes scattering resonances of the scalar wave equation
-div(sigma grad u) = omega^2 u outside a 2D obstacle by radial complex
scaling (perfectly matched layer), high-order finite elements on curved
structured meshes, and a shift-invert Arnoldi eigensolver, together with
the semi-analytic machinery (complex distances, damped fundamental
solutions, Hankel-root references) needed to validate the runs.
"""

from .errors import (
    AccuracyWarning,
    AssemblyError,
    ConfigError,
    DefinitenessError,
    DomainError,
    GenerationError,
    GeometryError,
    IncompleteSearchError,
    PreconditionError,
    ShiftRejectedError,
    SingularMatrixError,
    ValidationError,
)
from .media import (
    Medium,
    RangeBox,
    anisotropy_degree,
    b_tau,
    numerical_range_bounds,
    spd_extremes,
)
from .analytic import (
    MAX_ORDER,
    SUPPORTED_RADIUS,
    ComplexDistance,
    ResonanceReference,
    bessel_j,
    bessel_y,
    d_sigma,
    damping_rate,
    find_disk_neumann_references,
    green,
    hankel1,
    hankel1_deriv,
    outgoing_extension,
    read_reference_csv,
    scaled_green,
    spherical_h0,
    write_reference_csv,
)
from .scaling import (
    AdmissibilityReport,
    AffineProfile,
    HatState,
    RampProfile,
    ScalingLimits,
    ScalingProfile,
    ScalingState,
    SmoothedPolynomialProfile,
    admissible,
    eval_scaling,
    gamma_of_omega,
    hat_state,
    limits,
    min_stabilizing_c,
    t_symbol,
)
from .mesh import (
    BOUNDARY_OBSTACLE,
    BOUNDARY_OUTER,
    REGION_INTERIOR,
    REGION_PML,
    DiskObstacle,
    EllipseObstacle,
    Geometry,
    Mesh,
    generate,
    load_mesh,
    max_edge_length,
    refine,
    save_mesh,
    triangle_areas,
)
from .fem import (
    DEFAULT_BC,
    DIRICHLET,
    NEUMANN,
    AssembledPencil,
    CondensedShiftSolver,
    FunctionSpace,
    assemble,
    element_matrices,
    rayleigh_residual,
    read_matrix_coo,
    scaled_tensor,
    scaled_tensor_3d,
    write_matrix_coo,
)
from .eig import (
    Spectrum,
    read_spectrum_csv,
    shift_invert_arnoldi,
    sparse_lu,
    spurious_filter,
    write_spectrum_csv,
    write_spectrum_json,
)

__version__ = "0.1.0"
