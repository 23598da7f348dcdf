"""Structure-preserving Hermite-spectral solver for a confined quantum
Navier-Stokes flow, written against a Gaussian reference measure.

The building blocks, bottom up: ``spectral`` (frames, fields, transforms,
the Ornstein-Uhlenbeck operator), ``calculus`` (twisted operators and
capillarity identities), ``fokker_planck`` (semigroup density updates and
positivity envelopes), ``galerkin`` (mass operator, weak forces, coupled
stepping), ``diagnostics`` (energies, entropies, moments, inequality
audits), ``continuation`` (mollified data and vanishing-drag sweeps),
``rescaled`` (self-similar variables for the unconfined flow) and ``cli``
(run orchestration).

Frames and fields are immutable values; every public operation is a pure
function of them, so states can be shared or snapshotted freely.
"""

from .calculus import (
    ModelParams,
    bohm_residual,
    div_m,
    grad_parts,
    hessian_log,
    korteweg_tensor,
    q_of_rho,
    rho_of_q,
)
from .continuation import DragSchedule, drag_schedule, mollify_initial_data, vanishing_drag_sweep
from .diagnostics import (
    DiagnosticsRecord,
    bd_entropy,
    check_hessian_lemma,
    check_log_sobolev,
    energy,
    energy_inequality_audit,
    i2_ode_residual,
    moments,
    poincare_korn_ratio,
    poincare_ratio,
)
from .driver import SimulationResult, simulate
from .errors import (
    ConfigError,
    DimensionError,
    InternalConsistencyError,
    InvalidParameterError,
    PositivityError,
    StepFailureError,
)
from .fokker_planck import PositivityEnvelope, envelope_check, envelope_update, fp_step, ou_semigroup
from .galerkin import (
    MassOperator,
    SimState,
    assemble_mass,
    coupled_step,
    make_initial_state,
    momentum_rhs,
    project_initial_velocity,
    recenter,
)
from .rescaled import TauState, rescale_map, inverse_rescale_map, rescaled_energy, rescaled_step, tau_solve
from .spectral import (
    GaussianFrame,
    ScalarField,
    TensorField,
    VectorField,
    build_frame,
    derivative,
    integrate,
    inverse_transform,
    multiply,
    ou_apply,
    sigma_from_coefficients,
    transform,
)

__version__ = "0.1.0"
