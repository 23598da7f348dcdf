r"""Scalar functionals and inequality audits for the confined quantum flow.

Everything the dissipative structure of the system rests on is computed
here as a plain quadrature functional of the current state: the relative
energy and its dissipation, the Bresch-Desjardins (BD) entropy built on the
effective velocity :math:`u + 2\nu\nabla\ln q`, the Gaussian moments, the
mean position/velocity pair, and the functional-inequality margins
(logarithmic Sobolev, the Hessian-control lemma, the strong Poincare
family) that make the a-priori estimates close.

Entropic integrands are always assembled through square roots
(:math:`q|\nabla\ln q|^2 = |\nabla q|^2/q`, etc.) so that nothing
catastrophic happens near small densities, and densities below the
positivity floor raise instead of being clamped.

Sign conventions: every inequality is reported as a *margin*
(bound minus quantity), so margins should be non-negative up to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calculus import (
    ModelParams,
    POSITIVITY_FLOOR,
    gradient_nodal,
    hessian_log_nodal,
    hessian_nodal,
    masked_inverses,
    require_positive,
)
from .errors import InvalidParameterError
from .galerkin import SimState
from .spectral import ScalarField, VectorField, multiply

__all__ = [
    "DiagnosticsRecord",
    "energy",
    "bd_entropy",
    "bd_entropy_regularized",
    "moments",
    "record",
    "i2_ode_residual",
    "check_log_sobolev",
    "lsi_margins",
    "check_hessian_lemma",
    "check_poincare_family",
    "poincare_ratio",
    "poincare_korn_ratio",
    "energy_inequality_audit",
    "minimal_energy",
    "energy_lebesgue",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """All audited functionals of one state at one time."""

    t: float
    mass: float
    e_reg: float
    d_reg: float
    r_reg: float
    e_bd: float
    d_bd: float
    r_bd: float
    d_bd_reg: float
    r_bd_reg: float
    i2: float
    i2_tilde: float
    i4: float
    mx: tuple
    mu: tuple
    min_q: float
    max_q: float
    lsi_margin: float
    hess_margin_mid: float
    hess_margin_final: float
    poincare_q: float
    poincare_korn_u: float
    # auxiliary integrals feeding the second-moment equation audit
    ke2: float
    fisher: float
    cross_qu: float
    drag0_x: float
    drag1_x: float


class _StateBundle:
    """Shared nodal quantities for one (q, u) pair.

    Rational quantities (anything divided by a power of q) vanish on the
    frame's untrusted tail nodes; polynomial ones keep raw values so their
    quadrature sums stay exact.
    """

    def __init__(self, q: ScalarField, u: VectorField, floor: float):
        frame = q.frame
        self.frame = frame
        self.qn = require_positive(q, floor)
        self.mask = frame.trusted.astype(float)
        self.inv_q, self.inv_sq = masked_inverses(frame, self.qn, floor)
        self.q_safe = np.maximum(self.qn, floor)
        self.un = u.nodal
        self.gq = gradient_nodal(q)
        self.hq = hessian_nodal(q)
        self.glog = hessian_log_nodal(q, floor)  # sqrt(q) D^2 ln q
        self.raw2 = np.einsum("in,in->n", self.un, self.un)
        self.du = np.stack(
            [
                np.stack([frame.dV[k] @ u.components[i].coeffs for k in range(frame.dim)])
                for i in range(frame.dim)
            ]
        )
        self.dsym = 0.5 * (self.du + self.du.transpose(1, 0, 2))
        self.askew = 0.5 * (self.du - self.du.transpose(1, 0, 2))
        s2c = np.zeros(frame.n_basis)
        for c in u.components:
            s2c += multiply(c, c).coeffs
        self.s2 = frame.V @ s2c  # dealiased |u|^2
        self.fisher_integrand = np.einsum("in,in->n", self.gq, self.gq) * self.inv_q
        self.qlnq = self.mask * self.q_safe * np.log(self.q_safe)

    def quad(self, vals):
        return self.frame.quad(vals)


def _moment_values(b: _StateBundle):
    frame = b.frame
    sig2 = frame.sigma**2
    mass = b.quad(b.qn)
    i2 = b.quad(b.qn * frame.radius_sq) / sig2
    i4 = b.quad(b.qn * frame.radius_sq**2) / sig2**2
    mx = frame.nodes.T @ (frame.weights * b.qn)
    mu = np.array([b.quad(b.qn * b.un[i]) for i in range(frame.dim)])
    return mass, i2, i4, mx, mu


def moments(q: ScalarField, u: VectorField | None = None,
            floor: float = POSITIVITY_FLOOR):
    """(mass, I2, I2_tilde, I4, Mx, Mu); Mu is zero when no velocity is given."""
    frame = q.frame
    if u is None:
        u = VectorField.zero(frame)
    b = _StateBundle(q, u, floor)
    mass, i2, i4, mx, mu = _moment_values(b)
    return mass, i2, i2 - frame.dim, i4, mx, mu


def energy(q: ScalarField, u: VectorField, params: ModelParams,
           floor: float = POSITIVITY_FLOOR):
    """Relative energy, its dissipation and the diffusion remainder.

    E collects kinetic, capillary-Fisher and entropic parts plus the quartic
    drag moment r4/4 I4; D the full dissipation including the
    delta1-weighted terms; R the non-negative remainder r4 d1 (d+2) I2 /
    sigma^2 that the energy balance produces and the dissipation absorbs up
    to an explicit linear-in-time allowance.
    """
    b = _StateBundle(q, u, floor)
    return _energy_from_bundle(b, params)


def _energy_from_bundle(b: _StateBundle, params: ModelParams):
    frame = b.frame
    d = frame.dim
    sig2 = frame.sigma**2
    _, i2, i4, _, _ = _moment_values(b)
    e_val = (
        b.quad(b.qn * 0.5 * b.raw2 + 0.5 * params.kappa**2 * b.fisher_integrand
               + params.a * b.qlnq)
        + 0.25 * params.r4 * i4
    )
    dsym2 = np.einsum("ijn,ijn->n", b.dsym, b.dsym)
    glog2 = np.einsum("ijn,ijn->n", b.glog, b.glog)
    d_val = (
        2.0 * params.nu * b.quad(b.qn * dsym2)
        + params.delta1 * params.lam * sig2 * b.quad(b.fisher_integrand)
        + params.kappa**2 * params.delta1 * b.quad(glog2)
        + params.r0 * b.quad(b.raw2)
        + params.r1 * b.quad(b.qn * b.s2 * b.raw2)
        + params.r4 * params.delta1 / (4.0 * sig2) * i4
    )
    r_val = params.r4 * params.delta1 * (d + 2) / sig2 * i2
    return e_val, d_val, r_val


def bd_entropy(q: ScalarField, u: VectorField, params: ModelParams,
               floor: float = POSITIVITY_FLOOR):
    """BD entropy of the effective velocity, its dissipation and remainder.

    These are the drag-system forms (no diffusion regularization in the
    dissipation bookkeeping); the entropy itself is non-negative because
    q - ln q >= 1 and every other term is a square.
    """
    b = _StateBundle(q, u, floor)
    return _bd_from_bundle(b, params)


def _effective_kinetic(b: _StateBundle, params: ModelParams) -> np.ndarray:
    # q |u + 2 nu grad ln q|^2, expanded so the polynomial pieces stay raw:
    # q|u|^2 + 4 nu u.grad q + 4 nu^2 |grad q|^2 / q
    return (
        b.qn * b.raw2
        + 4.0 * params.nu * np.einsum("in,in->n", b.un, b.gq)
        + 4.0 * params.nu**2 * b.fisher_integrand
    )


def _bd_from_bundle(b: _StateBundle, params: ModelParams):
    frame = b.frame
    d = frame.dim
    sig2 = frame.sigma**2
    _, i2, i4, _, _ = _moment_values(b)
    e_bd = (
        b.quad(
            0.5 * (_effective_kinetic(b, params) + params.kappa**2 * b.fisher_integrand)
            + params.a * b.qlnq
        )
        + 2.0 * params.nu * params.r0
        * (b.quad(b.qn) - b.quad(b.mask * np.log(b.q_safe)))
        + 0.25 * params.r4 * i4
    )
    askew2 = np.einsum("ijn,ijn->n", b.askew, b.askew)
    glog2 = np.einsum("ijn,ijn->n", b.glog, b.glog)
    d_bd = (
        2.0 * params.nu * b.quad(b.qn * askew2)
        + 2.0 * params.nu * params.lam * sig2 * b.quad(b.fisher_integrand)
        + 2.0 * params.kappa**2 * params.nu * b.quad(glog2)
        + params.r0 * b.quad(b.raw2)
        + params.r1 * b.quad(b.qn * b.s2 * b.raw2)
        + 2.0 * params.r4 * params.nu / sig2 * i4
    )
    u_dot_gq = np.einsum("in,in->n", b.un, b.gq)
    r_bd = (
        2.0 * params.r4 * params.nu * (d + 2) / sig2 * i2
        - 2.0 * params.nu * params.r1 * b.quad(b.s2 * u_dot_gq)
        + 2.0 * params.nu / sig2 * (b.quad(b.qn * b.raw2) + 2.0 * params.nu * b.quad(u_dot_gq))
    )
    return e_bd, d_bd, r_bd


def bd_entropy_regularized(q: ScalarField, u: VectorField, params: ModelParams,
                           floor: float = POSITIVITY_FLOOR):
    """Dissipation/remainder pair of the diffusion-regularized BD balance.

    With delta1 = 0 this reduces to the plain pair from :func:`bd_entropy`.
    The balance d/dt E_BD + D_BD_reg = R_BD_reg holds along exact
    trajectories, so its integrated residual is the BD audit quantity.
    """
    b = _StateBundle(q, u, floor)
    frame = b.frame
    d = frame.dim
    sig2 = frame.sigma**2
    nu, d1 = params.nu, params.delta1
    _, i2, i4, _, _ = _moment_values(b)
    askew2 = np.einsum("ijn,ijn->n", b.askew, b.askew)
    glog2 = np.einsum("ijn,ijn->n", b.glog, b.glog)
    gradlog2 = b.fisher_integrand * b.inv_q  # |grad ln q|^2, unweighted
    d_bd = (
        2.0 * nu * b.quad(b.qn * askew2)
        + (d1 + 2.0 * nu) * params.lam * sig2 * b.quad(b.fisher_integrand)
        + (params.kappa**2 * (d1 + 2.0 * nu) + 4.0 * nu**2 * d1) * b.quad(glog2)
        + params.r0 * b.quad(b.raw2)
        + 2.0 * nu * params.r0 * d1 * b.quad(gradlog2)
        + params.r1 * b.quad(b.qn * b.s2 * b.raw2)
        + params.r4 * (d1 + 2.0 * nu) / sig2 * i4
    )
    # q D^2(ln q) without the sqrt weight; rational part masked
    qhlog = b.hq * b.mask - np.einsum("in,jn->ijn", b.gq, b.gq) * b.inv_q
    du_gq_glog = np.einsum("ikn,kn,in->n", b.du, b.gq, b.gq) * b.inv_q
    u_dot_gq = np.einsum("in,in->n", b.un, b.gq)
    r_bd = (
        params.r4 * (d1 + 2.0 * nu) * (d + 2) / sig2 * i2
        - 2.0 * nu * d1 * b.quad(np.einsum("ikn,ikn->n", b.dsym, qhlog))
        - 2.0 * nu * d1 * b.quad(du_gq_glog)
        - 2.0 * nu * params.r1 * b.quad(b.s2 * u_dot_gq)
        + 2.0 * nu / sig2 * (
            b.quad(b.qn * b.raw2)
            + (2.0 * nu - d1) * b.quad(u_dot_gq)
            - 2.0 * nu * d1 * b.quad(b.fisher_integrand)
        )
    )
    return d_bd, r_bd


def check_log_sobolev(q: ScalarField, floor: float = POSITIVITY_FLOOR,
                      mass_tol: float = 1e-8) -> float:
    """Margin of the Gaussian logarithmic Sobolev inequality for q.

    Uses the constant 2 sigma^2, the one the exponential-tilt extremizers
    single out: margin = 2 sigma^2 int |grad sqrt(q)|^2 - int q ln q >= 0,
    with equality exactly on tilted Gaussians.
    """
    return lsi_margins(q, floor, mass_tol)[0]


def lsi_margins(q: ScalarField, floor: float = POSITIVITY_FLOOR,
                mass_tol: float = 1e-8):
    """(margin with constant 2 sigma^2, margin with constant 2 / sigma^2).

    Both are surfaced in verification reports; the first is the asserted
    one, the second is informational (the two coincide at sigma = 1).
    """
    frame = q.frame
    qn = require_positive(q, floor)
    mass = frame.quad(qn)
    if abs(mass - 1.0) > mass_tol:
        raise InvalidParameterError(f"log-Sobolev check needs unit mass, got {mass:.12f}")
    inv_q, _ = masked_inverses(frame, qn, floor)
    gq = gradient_nodal(q)
    dirichlet = 0.25 * frame.quad(np.einsum("in,in->n", gq, gq) * inv_q)
    q_safe = np.maximum(qn, floor)
    entropy = frame.quad(frame.trusted * q_safe * np.log(q_safe))
    sig2 = frame.sigma**2
    return 2.0 * sig2 * dirichlet - entropy, (2.0 / sig2) * dirichlet - entropy


def check_hessian_lemma(q: ScalarField, floor: float = POSITIVITY_FLOOR):
    """Hessian-control audit: (A, B, D, I4, margin_intermediate, margin_final).

    A is the squared Hessian of sqrt(q), B the quartic gradient of q^(1/4),
    D the weighted Hessian of ln sqrt(q); the two margins are

        D + sqrt(3 B D) + I4^(1/4) B^(3/4) / sigma - (A + B)        >= 0
        4 D + 3 I4 / (4 sigma^4)  - (A + B/2)                       >= 0
    """
    frame = q.frame
    qn = require_positive(q, floor)
    inv_q, inv_sq = masked_inverses(frame, qn, floor)
    gq = gradient_nodal(q)
    hq = hessian_nodal(q)
    hess_sqrt = 0.5 * hq * inv_sq - 0.25 * np.einsum("in,jn->ijn", gq, gq) * inv_q * inv_sq
    a_val = frame.quad(np.einsum("ijn,ijn->n", hess_sqrt, hess_sqrt))
    grad2 = np.einsum("in,in->n", gq, gq)
    b_val = frame.quad(grad2**2 * inv_q**3 / 16.0)
    glog = hessian_log_nodal(q, floor)
    d_val = 0.25 * frame.quad(np.einsum("ijn,ijn->n", glog, glog))
    i4 = frame.quad(qn * frame.radius_sq**2) / frame.sigma**4
    margin_mid = (
        d_val
        + math.sqrt(3.0 * b_val * d_val)
        + i4**0.25 * b_val**0.75 / frame.sigma
        - (a_val + b_val)
    )
    margin_final = 4.0 * d_val + 0.75 * i4 / frame.sigma**4 - (a_val + 0.5 * b_val)
    return a_val, b_val, d_val, i4, margin_mid, margin_final


_ZERO_RATIO_TOL = 1e-13


def poincare_ratio(f: ScalarField) -> float:
    """Empirical strong-Poincare ratio |sqrt(1+|x|^2)(f - mean)| / |grad f|."""
    frame = f.frame
    fn = f.nodal
    mean = frame.quad(fn)
    lhs = math.sqrt(frame.quad((1.0 + frame.radius_sq) * (fn - mean) ** 2))
    gf = gradient_nodal(f)
    rhs = math.sqrt(frame.quad(np.einsum("in,in->n", gf, gf)))
    if rhs < _ZERO_RATIO_TOL:
        if lhs < _ZERO_RATIO_TOL:
            return 0.0
        return math.inf
    return lhs / rhs


def _rotation_projection(u: VectorField) -> np.ndarray:
    """Weighted L^2_mu projection onto the infinitesimal rotations, nodal values."""
    frame = u.frame
    if frame.dim == 1:
        return np.zeros((1, frame.n_nodes))
    x, y = frame.nodes[:, 0], frame.nodes[:, 1]
    rot = np.stack([-y, x])
    un = u.nodal
    num = frame.quad(np.einsum("in,in->n", un, rot))
    den = frame.quad(np.einsum("in,in->n", rot, rot))
    return (num / den) * rot


def poincare_korn_ratio(u: VectorField) -> float:
    """Korn-type ratio with mean and infinitesimal rotation removed.

    |sqrt(1+|x|^2)(u - mean - Proj u)| / |D(u)|; rigid rotations and
    constants give 0 by convention (both sides vanish).
    """
    frame = u.frame
    un = u.nodal
    mean = np.array([frame.quad(un[i]) for i in range(frame.dim)])
    centered = un - mean[:, None] - _rotation_projection(u)
    lhs = math.sqrt(
        frame.quad((1.0 + frame.radius_sq) * np.einsum("in,in->n", centered, centered))
    )
    du = np.stack(
        [
            np.stack([frame.dV[k] @ u.components[i].coeffs for k in range(frame.dim)])
            for i in range(frame.dim)
        ]
    )
    dsym = 0.5 * (du + du.transpose(1, 0, 2))
    rhs = math.sqrt(frame.quad(np.einsum("ijn,ijn->n", dsym, dsym)))
    if rhs < _ZERO_RATIO_TOL:
        if lhs < _ZERO_RATIO_TOL:
            return 0.0
        return math.inf
    return lhs / rhs


def check_poincare_family(samples) -> dict:
    """Empirical ratio report over a family of scalar and vector fields.

    Scalar entries go through :func:`poincare_ratio`, vector ones through
    :func:`poincare_korn_ratio`.  Only finiteness of the suprema is a
    meaningful assertion; the constants themselves are reported, never
    pinned.
    """
    scalar, vector = [], []
    for f in samples:
        if isinstance(f, VectorField):
            vector.append(poincare_korn_ratio(f))
        else:
            scalar.append(poincare_ratio(f))
    report = {
        "scalar_ratios": scalar,
        "vector_ratios": vector,
        "sup_scalar": max(scalar) if scalar else 0.0,
        "sup_vector": max(vector) if vector else 0.0,
    }
    report["all_finite"] = bool(
        np.isfinite(report["sup_scalar"]) and np.isfinite(report["sup_vector"])
    )
    return report


def record(state: SimState, params: ModelParams,
           floor: float = POSITIVITY_FLOOR) -> DiagnosticsRecord:
    """Full diagnostics of one state."""
    q, u = state.q, state.u
    frame = q.frame
    b = _StateBundle(q, u, floor)
    mass, i2, i4, mx, mu = _moment_values(b)
    e_reg, d_reg, r_reg = _energy_from_bundle(b, params)
    e_bd, d_bd, r_bd = _bd_from_bundle(b, params)
    d_bd_reg, r_bd_reg = bd_entropy_regularized(q, u, params, floor)
    lsi = lsi_margins(q, floor, mass_tol=1e-6)[0]
    _, _, _, _, hmid, hfin = check_hessian_lemma(q, floor)
    sqrt_q = ScalarField(frame, nodal=np.sqrt(b.q_safe))
    x_dot_u = np.einsum("in,in->n", frame.nodes.T, b.un)
    return DiagnosticsRecord(
        t=float(state.t),
        mass=mass,
        e_reg=e_reg,
        d_reg=d_reg,
        r_reg=r_reg,
        e_bd=e_bd,
        d_bd=d_bd,
        r_bd=r_bd,
        d_bd_reg=d_bd_reg,
        r_bd_reg=r_bd_reg,
        i2=i2,
        i2_tilde=i2 - frame.dim,
        i4=i4,
        mx=tuple(float(v) for v in mx),
        mu=tuple(float(v) for v in mu),
        min_q=float(np.min(b.qn[frame.trusted])),
        max_q=float(np.max(b.qn[frame.trusted])),
        lsi_margin=lsi,
        hess_margin_mid=hmid,
        hess_margin_final=hfin,
        poincare_q=poincare_ratio(sqrt_q),
        poincare_korn_u=poincare_korn_ratio(u),
        ke2=b.quad(b.qn * b.raw2),
        fisher=b.quad(b.fisher_integrand),
        cross_qu=b.quad(np.einsum("in,in->n", b.gq, b.un)),
        drag0_x=b.quad(x_dot_u),
        drag1_x=b.quad(b.qn * b.s2 * x_dot_u),
    )


def _fd4(values: np.ndarray, dt: float):
    """Fourth-order central first and second differences on the interior."""
    f = values
    i = np.arange(2, len(f) - 2)
    d1 = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * dt)
    d2 = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) / (
        12.0 * dt**2
    )
    return i, d1, d2


def i2_ode_residual(records, params: ModelParams, sigma: float | None = None) -> float:
    """Residual of the damped-oscillator equation for the recentered second moment.

    The recentered moment obeys

        I2~'' + (2 nu / sigma^2) I2~' + 2 [lam + kappa^2/sigma^4] I2~
            = (2/sigma^2)[ int q|u|^2 + kappa^2 int q |grad ln q|^2 ]
              + (4 nu / sigma^2) int grad q . u
              - (2 r0/sigma^2) int u.x - (2 r1/sigma^2) int q|u|^2 u.x
              - (2 r4/sigma^2) I4,

    valid along trajectories of the drag system (delta1 = 0).  Time
    derivatives are formed with fourth-order central differences on a
    uniform sampling; the return value is the max residual over interior
    times.
    """
    if len(records) < 5:
        raise InvalidParameterError("need at least 5 uniformly spaced records")
    if sigma is None:
        from .spectral import sigma_from_coefficients

        sigma = sigma_from_coefficients(params.a, params.kappa, params.lam)
    t = np.array([r.t for r in records])
    dts = np.diff(t)
    dt = dts[0]
    if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1.0):
        raise InvalidParameterError("records must be uniformly spaced in time")
    sig2 = sigma**2
    i2t = np.array([r.i2_tilde for r in records])
    idx, d1, d2 = _fd4(i2t, dt)
    lhs = d2 + (2.0 * params.nu / sig2) * d1 + 2.0 * (params.lam + params.kappa**2 / sig2**2) * i2t[idx]
    ke2 = np.array([r.ke2 for r in records])[idx]
    fisher = np.array([r.fisher for r in records])[idx]
    cross = np.array([r.cross_qu for r in records])[idx]
    d0x = np.array([r.drag0_x for r in records])[idx]
    d1x = np.array([r.drag1_x for r in records])[idx]
    i4 = np.array([r.i4 for r in records])[idx]
    rhs = (
        (2.0 / sig2) * (ke2 + params.kappa**2 * fisher)
        + (4.0 * params.nu / sig2) * cross
        - (2.0 * params.r0 / sig2) * d0x
        - (2.0 * params.r1 / sig2) * d1x
        - (2.0 * params.r4 / sig2) * i4
    )
    return float(np.max(np.abs(lhs - rhs)))


def _cumtrapz(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(t))
    return out


def energy_inequality_audit(records, params: ModelParams, sigma: float | None = None,
                            dim: int | None = None) -> dict:
    """Worst violations of the integrated energy and BD balances.

    Energy:  E(t) + 1/2 int_0^t D  <=  E(0) + 2 r4 d1 (d+2)^2 / sigma^2 * t,
    the explicit form of the absorbed remainder.  BD: the integrated
    regularized balance E_BD(t) + int (D_BD_reg - R_BD_reg) = E_BD(0), whose
    positive-part residual measures pure discretization error.  Violations
    shrink like O(dt) under refinement.  ``sigma`` defaults to the scale the
    model coefficients determine; ``dim`` to the record's mean-vector length.
    """
    if sigma is None:
        from .spectral import sigma_from_coefficients

        sigma = sigma_from_coefficients(params.a, params.kappa, params.lam)
    if dim is None:
        dim = len(records[0].mx)
    t = np.array([r.t for r in records])
    e = np.array([r.e_reg for r in records])
    d_vals = np.array([r.d_reg for r in records])
    allowance = 2.0 * params.r4 * params.delta1 * (dim + 2) ** 2 / sigma**2 * (t - t[0])
    lhs = e + 0.5 * _cumtrapz(d_vals, t)
    energy_violation = float(np.max(lhs - e[0] - allowance))

    e_bd = np.array([r.e_bd for r in records])
    net = np.array([r.d_bd_reg - r.r_bd_reg for r in records])
    bd_residual = e_bd + _cumtrapz(net, t) - e_bd[0]
    bd_violation = float(np.max(bd_residual))

    return {
        "energy_violation": max(energy_violation, 0.0),
        "bd_violation": max(bd_violation, 0.0),
        "mass_error": float(np.max(np.abs(np.array([r.mass for r in records]) - 1.0))),
        "ebd_min": float(np.min(e_bd)),
        "final_energy": float(e[-1]),
    }


def minimal_energy(params: ModelParams, sigma: float, dim: int) -> float:
    """Flat-measure energy of the Gaussian equilibrium."""
    return dim * (params.kappa**2 / sigma**2 - 0.5 * params.a * math.log(2.0 * math.pi * sigma**2))


def energy_lebesgue(q: ScalarField, u: VectorField, params: ModelParams,
                    floor: float = POSITIVITY_FLOOR) -> float:
    """Total flat-measure energy of rho = q rho_m: kinetic + entropic +
    capillary-Fisher + confinement, computed by the same quadrature."""
    frame = q.frame
    d = frame.dim
    sig2 = frame.sigma**2
    b = _StateBundle(q, u, floor)
    ln_rho_m = -0.5 * d * math.log(2.0 * math.pi * sig2) - frame.radius_sq / (2.0 * sig2)
    # q |grad ln rho|^2 expanded: |grad q|^2/q - 2 grad q . x / sigma^2 + q |x|^2 / sigma^4
    fisher_rho = (
        b.fisher_integrand
        - 2.0 * np.einsum("in,in->n", b.gq, frame.nodes.T) / sig2
        + b.qn * frame.radius_sq / sig2**2
    )
    return (
        0.5 * b.quad(b.qn * b.raw2)
        + params.a * (b.quad(b.qlnq) + b.quad(b.qn * ln_rho_m))
        + 0.5 * params.kappa**2 * b.quad(fisher_rho)
        + 0.5 * params.lam * b.quad(b.qn * frame.radius_sq)
    )


def csv_header(dim: int) -> list[str]:
    """Fixed column order of one trajectory row."""
    cols = ["t", "mass", "E_reg", "D_reg", "E_BD", "D_BD", "I2", "I2_tilde", "I4"]
    cols += [f"Mx_{i}" for i in range(dim)]
    cols += [f"Mu_{i}" for i in range(dim)]
    cols += [
        "min_q",
        "max_q",
        "lsi_margin",
        "hess_margin_mid",
        "hess_margin_final",
        "poincare_q",
        "poincare_korn_u",
    ]
    return cols


def csv_row(rec: DiagnosticsRecord) -> list[float]:
    vals = [rec.t, rec.mass, rec.e_reg, rec.d_reg, rec.e_bd, rec.d_bd, rec.i2,
            rec.i2_tilde, rec.i4]
    vals += list(rec.mx)
    vals += list(rec.mu)
    vals += [rec.min_q, rec.max_q, rec.lsi_margin, rec.hess_margin_mid,
             rec.hess_margin_final, rec.poincare_q, rec.poincare_korn_u]
    return vals
