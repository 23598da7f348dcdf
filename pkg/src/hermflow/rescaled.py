r"""Self-similar variables for the unconfined flow.

Without confinement the density spreads; the time-dependent dilation

.. math::

    \rho(t,x) = \tau(t)^{-d} R\big(t, x/\tau(t)\big), \qquad
    u(t,x) = \tau(t)^{-1} U\big(t, x/\tau(t)\big) + \frac{\dot\tau}{\tau}x,

absorbs the spreading when the dilation factor solves

.. math::

    \ddot\tau = \frac{a}{\tau} + \frac{\kappa^2}{\tau^3}
              - \frac{2\nu\,\dot\tau}{\tau^2},
    \qquad \tau(0) = 1,\ \dot\tau(0) = 0,

which grows like :math:`t\sqrt{2a\ln t}` and, at zero viscosity, conserves
:math:`\tfrac12\dot\tau^2 - a\ln\tau + \kappa^2/(2\tau^2)`.

In the new variables the system keeps its structure with coefficients
that depend on :math:`\tau`: transport, viscosity and capillarity carry
:math:`1/\tau^2` and the pressure coefficient becomes
:math:`a - 2\nu\dot\tau/\tau` (plus a :math:`\kappa^2/\tau^2` remnant once
the quantum stress is written weakly, see ``_tau_coeffs``).  The reference
measure here is the unit Gaussian (sigma = 1), and the standard stepping
machinery is reused with the coefficients frozen at the midpoint dilation
of each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calculus import ModelParams, POSITIVITY_FLOOR, gradient_nodal
from .errors import InvalidParameterError, StepFailureError
from .fokker_planck import fp_step
from .galerkin import assemble_mass, momentum_rhs
from .spectral import GaussianFrame, ScalarField, VectorField

__all__ = [
    "TauState",
    "tau_rhs",
    "tau_energy",
    "tau_solve",
    "rescale_map",
    "inverse_rescale_map",
    "rescaled_step",
    "rescaled_energy",
    "rescaled_bd_remainder",
    "combined_identity_residual",
]


@dataclass(frozen=True)
class TauState:
    """Dilation factor, its rate and the time they belong to."""

    tau: float
    tau_dot: float
    t: float


def tau_rhs(tau: float, tau_dot: float, a: float, kappa: float, nu: float) -> float:
    return a / tau + kappa**2 / tau**3 - 2.0 * nu * tau_dot / tau**2


def tau_energy(state: TauState, a: float, kappa: float) -> float:
    """Quantity conserved by the dilation at zero viscosity."""
    return 0.5 * state.tau_dot**2 - a * math.log(state.tau) + 0.5 * kappa**2 / state.tau**2


def tau_solve(a: float, kappa: float, nu: float, t_final: float, dt: float,
              store_every: int = 1) -> list[TauState]:
    """Classical fourth-order Runge-Kutta on (tau, tau_dot) from (1, 0)."""
    if dt <= 0.0 or t_final <= 0.0:
        raise InvalidParameterError("t_final and dt must be positive")
    n_steps = int(round(t_final / dt))
    tau, p, t = 1.0, 0.0, 0.0
    out = [TauState(tau, p, t)]
    for step in range(n_steps):
        k1t, k1p = p, tau_rhs(tau, p, a, kappa, nu)
        k2t, k2p = p + 0.5 * dt * k1p, tau_rhs(tau + 0.5 * dt * k1t, p + 0.5 * dt * k1p, a, kappa, nu)
        k3t, k3p = p + 0.5 * dt * k2p, tau_rhs(tau + 0.5 * dt * k2t, p + 0.5 * dt * k2p, a, kappa, nu)
        k4t, k4p = p + dt * k3p, tau_rhs(tau + dt * k3t, p + dt * k3p, a, kappa, nu)
        tau += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        t = (step + 1) * dt
        if tau <= 0.0:
            raise StepFailureError(f"dilation factor became non-positive at t={t:.6g}")
        if (step + 1) % store_every == 0 or step + 1 == n_steps:
            out.append(TauState(tau, p, t))
    return out


def rescale_map(rho, u, tau_state: TauState, frame: GaussianFrame):
    """Physical (rho, u) -> rescaled (Q, U) fields on the unit-Gaussian frame.

    ``rho`` and ``u`` are callables of position arrays (shape (m, d) ->
    values); the rescaled fields are sampled at the frame's nodes scaled by
    tau and projected.  Mass transfers exactly: int R dy = int rho dx.
    """
    if tau_state.tau <= 0.0:
        raise InvalidParameterError("tau must be positive")
    tau, tdot = tau_state.tau, tau_state.tau_dot
    d = frame.dim
    pts = tau * frame.nodes
    r_vals = tau**d * np.asarray(rho(pts), dtype=float)
    q_field = ScalarField(frame, nodal=r_vals / frame.rho_m_nodes)
    u_vals = np.asarray(u(pts), dtype=float).reshape(d, frame.n_nodes)
    big_u = tau * u_vals - tdot * tau * frame.nodes.T
    u_field = VectorField.from_nodal(frame, big_u)
    return q_field, u_field


def inverse_rescale_map(q_field: ScalarField, u_field: VectorField,
                        tau_state: TauState):
    """Rescaled (Q, U) fields -> physical (rho, u) as callables of position.

    Evaluation requests outside the dilated image of the resolved window
    emit an accuracy warning (the spectral representation extrapolates
    there).
    """
    import warnings

    tau, tdot = tau_state.tau, tau_state.tau_dot
    frame = q_field.frame
    d = frame.dim
    hull = tau * float(np.max(np.abs(frame.nodes_1d)))

    def _scaled(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.max(np.abs(pts)) > hull:
            warnings.warn(
                "evaluating the dilated fields outside the resolved window; "
                "values there are spectral extrapolation",
                stacklevel=3,
            )
        return pts, pts / tau

    def rho(points):
        _, y = _scaled(points)
        return tau**-d * q_field.eval(y) * frame.rho_m(y)

    def u(points):
        pts, y = _scaled(points)
        vals = np.stack([c.eval(y) for c in u_field.components])
        return vals / tau + (tdot / tau) * pts.T

    return rho, u


def _tau_coeffs(params: ModelParams, tau: float, tau_dot: float):
    # Writing the quantum stress weakly against D(phi) on the unit frame
    # leaves a kappa^2/tau^2 pressure remnant, the analogue of the
    # kappa^2/sigma^2 share inside lam*sigma^2 for the confined system.
    return {
        "nu": params.nu / tau**2,
        "kappa_sq": params.kappa**2 / tau**2,
        "pressure_coef": params.a - 2.0 * params.nu * tau_dot / tau + params.kappa**2 / tau**2,
        "transport_coef": 1.0 / tau**2,
    }


def rescaled_step(q: ScalarField, u: VectorField, tau_mid: TauState,
                  params: ModelParams, dt: float,
                  picard_tol: float = 1e-10, max_sweeps: int = 25,
                  fp_sweeps: int = 2, floor: float = POSITIVITY_FLOOR):
    """One joint step of the dilated system with coefficients frozen at tau_mid.

    The drag and diffusion regularizations are not part of the dilated
    system; they must be zero here.
    """
    if any(getattr(params, k) != 0.0 for k in ("r0", "r1", "r4", "delta1")):
        raise InvalidParameterError("rescaled stepping requires r0 = r1 = r4 = delta1 = 0")
    frame = q.frame
    coeffs = _tau_coeffs(params, tau_mid.tau, tau_mid.tau_dot)
    momentum_prev = assemble_mass(q).apply(u.coeffs)
    u_iter = u
    q_new = q
    converged = False
    for _ in range(max_sweeps):
        u_adv = (0.5 / tau_mid.tau**2) * (u + u_iter)
        q_new = fp_step(q, u_adv, 0.0, dt, sweeps=fp_sweeps)
        q_mid = 0.5 * (q + q_new)
        u_mid = 0.5 * (u + u_iter)
        force = momentum_rhs(q_mid, u_mid, params, floor, **coeffs)
        u_next = VectorField.from_coeffs(frame, assemble_mass(q_new).solve(momentum_prev + dt * force))
        diff = float(np.linalg.norm(u_next.coeffs - u_iter.coeffs))
        u_iter = u_next
        if diff < picard_tol:
            converged = True
            break
    if not converged:
        raise StepFailureError(
            f"rescaled velocity fixed point did not settle below {picard_tol:.1e}; reduce dt"
        )
    return q_new, u_iter


def rescaled_energy(q: ScalarField, u: VectorField, tau_state: TauState,
                    params: ModelParams, floor: float = POSITIVITY_FLOOR):
    """(E, D, E_BD, D_BD) of the dilated system at one state.

    The effective velocity W = U + 2 nu grad(ln Q) carries the entropy.
    The summed balance d/dt(E + E_BD) + D + D_BD closes up to the twist
    remainder returned by :func:`rescaled_bd_remainder`;
    :func:`combined_identity_residual` audits it either way.
    """
    frame = q.frame
    from .calculus import hessian_log_nodal, masked_inverses, require_positive

    qn = require_positive(q, floor)
    inv_q, _ = masked_inverses(frame, qn, floor)
    tau, tdot = tau_state.tau, tau_state.tau_dot
    un = u.nodal
    gq = gradient_nodal(q)
    fisher_integrand = np.einsum("in,in->n", gq, gq) * inv_q
    ke = frame.quad(qn * np.einsum("in,in->n", un, un))
    dirichlet = 0.25 * frame.quad(fisher_integrand)
    q_safe = np.maximum(qn, floor)
    entropy = frame.quad(frame.trusted * q_safe * np.log(q_safe))
    kinetic_block = ke + 4.0 * params.kappa**2 * dirichlet

    du = np.stack(
        [
            np.stack([frame.dV[k] @ u.components[i].coeffs for k in range(frame.dim)])
            for i in range(frame.dim)
        ]
    )
    dsym = 0.5 * (du + du.transpose(1, 0, 2))
    askew = 0.5 * (du - du.transpose(1, 0, 2))
    glog = hessian_log_nodal(q, floor)
    # q|W|^2 with W = U + 2 nu grad(ln Q), expanded to keep polynomials raw
    cross = frame.quad(np.einsum("in,in->n", un, gq))
    fisher = frame.quad(fisher_integrand)
    ke_w = ke + 4.0 * params.nu * cross + 4.0 * params.nu**2 * fisher

    e_val = 0.5 / tau**2 * kinetic_block + params.a * entropy
    d_val = tdot / tau**3 * kinetic_block + 2.0 * params.nu / tau**4 * frame.quad(
        qn * np.einsum("ijn,ijn->n", dsym, dsym)
    )
    e_bd = 0.5 / tau**2 * (ke_w + 4.0 * params.kappa**2 * dirichlet) + params.a * entropy
    d_bd = (
        tdot / tau**3 * kinetic_block
        + 2.0 * params.nu / tau**4 * frame.quad(qn * np.einsum("ijn,ijn->n", askew, askew))
        + 2.0 * params.nu * params.kappa**2 / tau**4
        * frame.quad(np.einsum("ijn,ijn->n", glog, glog))
        + 2.0 * params.nu * (params.a / tau**2 + params.kappa**2 / tau**4) * fisher
    )
    return e_val, d_val, e_bd, d_bd


def rescaled_bd_remainder(q: ScalarField, u: VectorField, tau_state: TauState,
                          params: ModelParams,
                          floor: float = POSITIVITY_FLOOR) -> float:
    r"""Twist-induced remainder of the dilated entropy balance.

    The effective-velocity equation picks up a source
    :math:`(2\nu/\tau^2)\,QU` from the Gaussian twist of the transport
    term (the analogue of the :math:`2\nu/\sigma^2` share in the confined
    system's entropy remainder), so the exact summed balance reads

    .. math::

        \frac{\rm d}{{\rm d}t}(E + E_{\rm BD}) + D + D_{\rm BD}
            = \frac{2\nu}{\tau^4}\int Q\,U\cdot(U + 2\nu\nabla\ln Q)\,
              {\rm d}\mu_m.

    This function returns the right-hand side.
    """
    from .calculus import require_positive

    frame = q.frame
    qn = require_positive(q, floor)
    gq = gradient_nodal(q)
    ke = frame.quad(qn * np.einsum("in,in->n", u.nodal, u.nodal))
    cross = frame.quad(np.einsum("in,in->n", u.nodal, gq))
    return 2.0 * params.nu / tau_state.tau**4 * (ke + 2.0 * params.nu * cross)


def combined_identity_residual(energies, dt: float, remainders=None) -> float:
    """Max interior residual of d/dt(E + E_BD) + D + D_BD on a uniform grid.

    ``energies`` is a sequence of (E, D, E_BD, D_BD) tuples sampled every
    dt; centered differences approximate the derivative.  When
    ``remainders`` (from :func:`rescaled_bd_remainder`) is supplied, the
    residual is measured against the exact balance and shrinks with dt;
    without it the twist remainder itself is reported.
    """
    if len(energies) < 3:
        raise InvalidParameterError("need at least 3 samples")
    arr = np.asarray(energies, dtype=float)
    total = arr[:, 0] + arr[:, 2]
    diss = arr[:, 1] + arr[:, 3]
    ddt = (total[2:] - total[:-2]) / (2.0 * dt)
    resid = ddt + diss[1:-1]
    if remainders is not None:
        resid = resid - np.asarray(remainders, dtype=float)[1:-1]
    return float(np.max(np.abs(resid)))
