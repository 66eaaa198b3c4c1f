"""Structure-preserving integrators for metriplectic systems."""
from .brackets import (
    MetricField,
    MetriplecticSystem,
    ScalarField,
    Symmetry,
    TensorField,
    build_psd_from_metric,
    build_psd_multi_constraint,
    check_casimir,
    check_jacobi,
    evaluate_poisson_bracket,
    evaluate_symmetric_bracket,
    hamiltonian_vector_field,
)
from .dgrad import DiscreteGradientScheme, discrete_gradient, verify_axioms
from .errors import ConfigurationError, IntegrationAborted, StepFailure
from .integrate import (
    IntegratorConfig,
    StepRecord,
    Trajectory,
    build_kd,
    convergence_study,
    integrate,
    metriplectic_step,
    rk4_integrate,
    rk4_step,
)
from .kernels import BACKEND
from .liealg import (
    AlgebraInnerProduct,
    ForceMap,
    QuadraticLagrangian,
    StructureConstants,
    rigid_body_system,
    so3_preset,
)

__version__ = "0.1.0"
