"""Spectral-Galerkin solver and verification harness for doubly nonlinear
anisotropic evolution equations d_t(|u|^(alpha-1) u) = div A(x,t,u,grad u) + f
on boxes, with property-based audits of the algebraic machinery behind the
existence and comparison arguments."""

from .algebra import (
    QuadratureConvergenceError,
    TimeSeries,
    bregman_gap,
    bregman_gap_alt,
    exp_mollify,
    inequality_sweep,
    ramp,
    ramp_gap,
    ramp_gap_reflected,
    signed_power,
)
from .assembly import (
    Exponents,
    GalerkinState,
    MassMatrixNotSPDError,
    ProblemData,
    VectorFieldSpec,
    assemble_F,
    assemble_G,
    assemble_J,
    assemble_K,
    model_field,
    reduced_rhs,
    structure_condition_audit,
    theta_weight,
)
from .basis import (
    BoxDomain,
    GalerkinBasis,
    Quadrature,
    build_basis,
    default_quadrature_order,
    project_l2,
    tensor_quadrature,
)
from .solver import (
    ContinuationResult,
    EpsilonSchedule,
    SolutionTrajectory,
    SolverFailure,
    WholeSpaceData,
    default_epsilon_schedule,
    evaluate,
    solve_cauchy_dirichlet,
    solve_cauchy_expanding,
)
from .timestep import StepConvergenceError, StepperConfig, StepRecord, integrate, step
from .verification import (
    ComparisonAuditError,
    ComparisonReport,
    EnergyReport,
    check_comparison,
    discrete_energy_identity,
    energy_report,
    manufactured_error,
    manufactured_rhs,
    trapezoid_cutoff,
    weak_residual,
)

__all__ = [name for name in dir() if not name.startswith("_")]
