"""Structure-preserving space-time Runge-Kutta methods for stochastic
Hamiltonian PDEs: tableau certification, a 1D reference integrator with
discrete conservation diagnostics, and a 3D stochastic Maxwell solver."""

from .tableau import (
    Tableau,
    builtin_tableau,
    condition_residual,
    condition_residual_literal,
    is_multisymplectic,
)
from .system import (
    QuadraticSpec,
    SystemSpec,
    builtin_system,
    make_quadratic_system,
    quadratic_invariant_preconditions,
    system_from_dict,
    system_from_json,
    transport2,
    validate,
)
from .noise import (
    NoisePath,
    QWienerSpec,
    brownian_increments,
    increment_at,
    path_to_csv,
    sample_path,
    sine_family,
    tensor_sine_family,
)
from .solver import SolverConfig, SolverError
from .integrator1d import (
    DIAGNOSTICS,
    Engine1D,
    GridSpec,
    MidpointEngine,
    RunRecord,
    StepState,
    TangentPair,
    init_state,
    midpoint_step,
    ms_residual,
    quadratic_invariant,
    run,
    stage_points,
    step,
    tangent_step,
    wedge,
)
from .maxwell3d import (
    MAXWELL_DIAGNOSTICS,
    Grid3Spec,
    MaxwellEngine,
    MaxwellRunRecord,
    MaxwellSpec,
    MaxwellState,
    MaxwellTangentPair,
    TableauSet,
    default_qwiener,
    discrete_energy,
    init_maxwell_state,
    maxwell_ms_residual,
    maxwell_noise_path,
    maxwell_step,
    maxwell_system,
    run_maxwell,
    stage_points_3d,
)

__version__ = "0.1.0"
