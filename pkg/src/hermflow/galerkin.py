r"""Finite-dimensional momentum dynamics coupled to the density update.

The velocity lives in the product Hermite space spanned by the basis fields
:math:`\Phi_\beta e_i`.  Tested against those fields, the momentum balance
becomes the differential equation

.. math::

    \frac{\rm d}{{\rm d}t}\big(\mathfrak{M}[q]\,u\big)
        = \mathcal{A}[q]u + \mathcal{N}[q, u]u + \mathcal{B}[q],

where the mass operator :math:`\langle\mathfrak{M}[q]v, w\rangle = \int q\,
v\cdot w\,{\rm d}\mu_m` is symmetric positive-definite whenever q is bounded
below, and the right-hand side collects viscosity, drag, transport,
diffusion coupling, capillarity, pressure and the quartic confinement drag
in weak form (the capillarity stress only ever meets first derivatives of
the test fields).

One time step solves the density equation and the mass-matrix update as a
joint fixed point: the density is advanced with the current velocity
iterate, the forces are assembled at the midpoint state, and the velocity
solve repeats until successive iterates agree to ``picard_tol``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .calculus import (
    ModelParams,
    POSITIVITY_FLOOR,
    gradient_nodal,
    hessian_nodal,
    masked_inverses,
    require_positive,
)
from .errors import (
    InternalConsistencyError,
    InvalidParameterError,
    PositivityError,
    StepFailureError,
)
from .fokker_planck import PositivityEnvelope, divm_sup, envelope_update, fp_step
from .spectral import GaussianFrame, ScalarField, VectorField, multiply

__all__ = [
    "SimState",
    "MassOperator",
    "assemble_mass",
    "project_initial_velocity",
    "momentum_rhs",
    "coupled_step",
    "recenter",
    "make_initial_state",
]


@dataclass(frozen=True)
class SimState:
    """Relative density, velocity and time, plus the positivity envelope."""

    q: ScalarField
    u: VectorField
    t: float
    env: PositivityEnvelope

    @property
    def frame(self) -> GaussianFrame:
        return self.q.frame


def make_initial_state(q0: ScalarField, u0: VectorField, t: float = 0.0) -> SimState:
    env = PositivityEnvelope.from_initial_density(q0)
    env = PositivityEnvelope(c0=env.c0, accumulated=0.0, last_sup=divm_sup(u0))
    return SimState(q=q0, u=u0, t=t, env=env)


class MassOperator:
    """Density-weighted Gram matrix of the scalar basis.

    The full velocity-space operator is block diagonal with this same block
    for every component, so only one (n_basis x n_basis) matrix is stored.
    """

    __slots__ = ("frame", "matrix", "_cho")

    def __init__(self, frame: GaussianFrame, matrix: np.ndarray):
        self.frame = frame
        self.matrix = matrix
        self._cho = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve per velocity component; rhs has shape (dim, n_basis)."""
        if self._cho is None:
            try:
                self._cho = cho_factor(self.matrix, lower=True)
            except np.linalg.LinAlgError as exc:
                raise PositivityError(
                    "mass operator not positive definite; the density is "
                    f"under-resolved at the tails ({exc})"
                ) from exc
        return cho_solve(self._cho, np.asarray(rhs).T).T

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.matrix.T

    def smallest_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def assemble_mass(q: ScalarField) -> MassOperator:
    """Gram matrix of the basis weighted by q, by plain (exact) quadrature.

    Positive definite whenever q stays positive at the quadrature nodes;
    the top basis modes carry most of their weighted mass near their
    turning points, so a density whose tail is not resolved down there can
    make the operator lose positivity.  That failure surfaces loudly at
    solve time as a positivity error rather than being patched silently.
    """
    frame = q.frame
    wq = frame.weights * q.nodal
    mat = frame.V.T @ (wq[:, None] * frame.V)
    mat = 0.5 * (mat + mat.T)  # enforce exact symmetry
    return MassOperator(frame, mat)


def project_initial_velocity(q0: ScalarField, u0_nodal: np.ndarray | VectorField) -> VectorField:
    """q0-weighted projection of a velocity onto the spectral space.

    Solves int q0 uN.w dmu = int q0 u0.w dmu against every basis field.  The
    projection never increases the q0-weighted kinetic energy.
    """
    frame = q0.frame
    if isinstance(u0_nodal, VectorField):
        u0_nodal = u0_nodal.nodal
    u0_nodal = np.asarray(u0_nodal, dtype=float).reshape(frame.dim, frame.n_nodes)
    require_positive(q0)
    mass = assemble_mass(q0)
    wq = frame.weights * q0.nodal
    rhs = np.stack([frame.V.T @ (wq * u0_nodal[i]) for i in range(frame.dim)])
    return VectorField.from_coeffs(frame, mass.solve(rhs))


def _dealiased_speed_sq(u: VectorField) -> np.ndarray:
    """|u|^2 projected back to degree N before entering quartic forms."""
    frame = u.frame
    s2 = np.zeros(frame.n_basis)
    for c in u.components:
        s2 += multiply(c, c).coeffs
    return frame.V @ s2


def momentum_rhs(q: ScalarField, u: VectorField, params: ModelParams,
                 floor: float = POSITIVITY_FLOOR, *,
                 pressure_coef: float | None = None,
                 transport_coef: float = 1.0,
                 nu: float | None = None,
                 kappa_sq: float | None = None) -> np.ndarray:
    """Weak-form force vector, shape (dim, n_basis).

    Collects, tested against each basis field phi:

    * viscosity        -2 nu int q D(u):D(phi)
    * linear drag      -r0  int u . phi
    * transport        +    int q u.(grad phi) u
    * diffusion        -d1  int (grad u)(grad q) . phi
    * cubic drag       -r1  int q |u|^2 u . phi
    * capillarity      -2 kappa^2 int [sqrt(q)D^2 sqrt(q) - grad sqrt(q) x grad sqrt(q)] : D(phi)
    * pressure         -lam sigma^2 int grad q . phi
    * confinement drag -(r4/sigma^4) int q |x|^2 x . phi

    The keyword overrides let a rescaled system reuse the assembly with
    time-dependent coefficients.
    """
    frame = q.frame
    d = frame.dim
    sig2 = frame.sigma**2
    nu = params.nu if nu is None else nu
    kappa_sq = params.kappa**2 if kappa_sq is None else kappa_sq
    pressure = params.lam * sig2 if pressure_coef is None else pressure_coef

    qn = require_positive(q, floor)
    inv_q, _ = masked_inverses(frame, qn, floor)
    un = u.nodal
    du = np.stack([np.stack([frame.dV[k] @ u.components[i].coeffs for k in range(d)])
                   for i in range(d)])  # du[i, k] = d_k u_i
    dsym = 0.5 * (du + du.transpose(1, 0, 2))
    gq = gradient_nodal(q)
    hq = hessian_nodal(q)
    # capillarity: polynomial part raw (exact quadrature), rational part masked
    stress = 0.5 * hq - 0.5 * np.einsum("in,jn->ijn", gq, gq) * inv_q
    s2 = _dealiased_speed_sq(u)
    w = frame.weights
    x = frame.nodes.T
    rsq = frame.radius_sq

    out = np.empty((d, frame.n_basis))
    for i in range(d):
        point = (
            -params.r0 * un[i]
            - params.delta1 * np.einsum("kn,kn->n", du[i], gq)
            - params.r1 * qn * s2 * un[i]
            - pressure * gq[i]
            - (params.r4 / sig2**2) * qn * rsq * x[i]
        )
        vec = frame.V.T @ (w * point)
        for k in range(d):
            grad_part = (
                transport_coef * qn * un[i] * un[k]
                - 2.0 * nu * qn * dsym[i, k]
                - 2.0 * kappa_sq * stress[i, k]
            )
            vec += frame.dV[k].T @ (w * grad_part)
        out[i] = vec
    return out


def coupled_step(state: SimState, params: ModelParams, dt: float,
                 picard_tol: float = 1e-10, max_sweeps: int = 25,
                 fp_sweeps: int = 2, floor: float = POSITIVITY_FLOOR) -> SimState:
    """Advance density and velocity together by one joint fixed point.

    Density update and midpoint force assembly repeat until the velocity
    iterates settle below ``picard_tol`` in the coefficient norm; the mass
    matrix carries the momentum from the previous state so the update
    discretizes d/dt(M[q]u) directly.
    """
    if dt <= 0.0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    frame = state.frame
    q_prev, u_prev = state.q, state.u
    momentum_prev = assemble_mass(q_prev).apply(u_prev.coeffs)

    u_iter = u_prev
    q_new = q_prev
    converged = False
    for _ in range(max_sweeps):
        u_adv = 0.5 * (u_prev + u_iter)
        q_new = fp_step(q_prev, u_adv, params.delta1, dt, sweeps=fp_sweeps)
        q_mid = 0.5 * (q_prev + q_new)
        u_mid = 0.5 * (u_prev + u_iter)
        force = momentum_rhs(q_mid, u_mid, params, floor)
        u_next = VectorField.from_coeffs(
            frame, assemble_mass(q_new).solve(momentum_prev + dt * force)
        )
        diff = float(np.linalg.norm(u_next.coeffs - u_iter.coeffs))
        u_iter = u_next
        if diff < picard_tol:
            converged = True
            break
    if not converged:
        raise StepFailureError(
            f"velocity fixed point did not settle below {picard_tol:.1e} "
            f"in {max_sweeps} sweeps at t={state.t:.6g}; reduce dt"
        )

    drift = abs(float(q_new.coeffs[0]) - float(q_prev.coeffs[0]))
    if drift > 1e-10:
        raise InternalConsistencyError(f"mass drifted by {drift:.3e} over one step")
    env = envelope_update(state.env, u_iter, dt)
    return SimState(q=q_new, u=u_iter, t=state.t + dt, env=env)


def _mean_position(q: ScalarField) -> np.ndarray:
    frame = q.frame
    wq = frame.weights * q.nodal
    return frame.nodes.T @ wq


def _mean_velocity(q: ScalarField, u: VectorField) -> np.ndarray:
    frame = q.frame
    wq = frame.weights * q.nodal
    return np.array([float(wq @ c.nodal) for c in u.components])


def recenter(state: SimState, max_passes: int = 3, tol: float = 1e-12) -> SimState:
    """Shift the state so mean position and mean velocity vanish.

    Implemented by resampling the flat-measure density and velocity at the
    shifted quadrature nodes and re-projecting; the density picks up the
    Gaussian tilt factor rho_m(x + m)/rho_m(x).  Mass is restored exactly by
    rescaling the coefficients.
    """
    frame = state.frame
    q, u = state.q, state.u
    for _ in range(max_passes):
        m = _mean_position(q)
        mu = _mean_velocity(q, u)
        if np.max(np.abs(m)) < tol and np.max(np.abs(mu)) < tol:
            break
        if np.linalg.norm(m) > 0.5 * frame.sigma:
            warnings.warn(
                f"recentering shift |m|={np.linalg.norm(m):.3g} is large relative to "
                f"sigma={frame.sigma:.3g}; resampled fields may be under-resolved",
                stacklevel=2,
            )
        shifted = frame.nodes + m[None, :]
        basis = frame.basis_eval(shifted)
        tilt = np.exp(
            -(2.0 * frame.nodes @ m + float(m @ m)) / (2.0 * frame.sigma**2)
        )
        q_nodal = (basis @ q.coeffs) * tilt
        q = ScalarField(frame, coeffs=frame.project_nodal(q_nodal))
        mass = float(q.coeffs[0])
        if abs(mass) < 1e-14:
            raise InternalConsistencyError("recentered density lost its mass")
        q = ScalarField(frame, coeffs=q.coeffs / mass)
        u = VectorField(
            [
                ScalarField(frame, coeffs=frame.project_nodal(basis @ c.coeffs - mu[i]))
                for i, c in enumerate(u.components)
            ]
        )
    return SimState(q=q, u=u, t=state.t, env=state.env)
