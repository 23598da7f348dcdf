r"""Twisted differential calculus with respect to the Gaussian reference measure.

The change of measure turns the flat-space operators into their twisted
counterparts

.. math::

    {\rm div}_m(v) = {\rm div}(v) - \frac{x}{\sigma^2}\cdot v, \qquad
    \Delta_m q = {\rm div}_m(\nabla q),

which absorb the harmonic confinement and satisfy the integration-by-parts
formulae

.. math::

    \int \nabla q\cdot v\,{\rm d}\mu_m = -\int q\,{\rm div}_m(v)\,{\rm d}\mu_m,
    \qquad
    \int {\rm div}_m(D(v))\cdot w\,{\rm d}\mu_m = -\int {\rm tr}(D(v)D(w))\,{\rm d}\mu_m.

Square-root and capillarity quantities of a strictly positive relative
density q are computed nodally from exact spectral derivatives of q, using

.. math::

    \sqrt{q}\,D^2\sqrt{q} - \nabla\sqrt{q}\otimes\nabla\sqrt{q}
        = \tfrac12 D^2 q - \frac{\nabla q\otimes\nabla q}{2q},
    \qquad
    \sqrt{q}\,D^2(\ln q) = \frac{D^2 q}{\sqrt q} - \frac{\nabla q\otimes\nabla q}{q^{3/2}},

so no logarithm or square root is ever differentiated where q is tiny.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalConsistencyError, InvalidParameterError, PositivityError
from .spectral import GaussianFrame, ScalarField, TensorField, VectorField, derivative

__all__ = [
    "ModelParams",
    "POSITIVITY_FLOOR",
    "div_m",
    "div_m_tensor",
    "grad",
    "grad_parts",
    "korteweg_tensor",
    "korteweg_consistency",
    "hessian_log",
    "bohm_residual",
    "rho_of_q",
    "q_of_rho",
    "gradient_nodal",
    "hessian_nodal",
    "require_positive",
    "masked_inverses",
]

#: default floor for ln / sqrt / division on relative densities
POSITIVITY_FLOOR = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Physical coefficients and regularization knobs.

    a: pressure; kappa: capillarity; nu: viscosity; lam: confinement strength.
    r0, r1, r4 are the linear, cubic and quartic-confinement drag
    coefficients; delta1 is the density-diffusion regularization.  All four
    regularizing parameters live in [0, 1].
    """

    a: float
    kappa: float
    nu: float
    lam: float
    r0: float = 0.0
    r1: float = 0.0
    r4: float = 0.0
    delta1: float = 0.0

    def __post_init__(self):
        if self.a <= 0.0 or self.nu <= 0.0 or self.lam <= 0.0:
            raise InvalidParameterError(
                f"a, nu, lam must be strictly positive, got ({self.a}, {self.nu}, {self.lam})"
            )
        if self.kappa < 0.0:
            raise InvalidParameterError(f"kappa must be non-negative, got {self.kappa}")
        for name in ("r0", "r1", "r4", "delta1"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {val}")


def require_positive(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> np.ndarray:
    """Raw nodal values of q, floor-checked where the check is meaningful.

    Positivity is asserted on the frame's trusted nodes and a breach raises
    with the offending node attached; far-tail nodes carry no meaningful
    pointwise information and are exempt.  Divisions by q must go through
    :func:`masked_inverses`, never through the raw values.
    """
    qn = q.nodal
    trusted = q.frame.trusted
    inner = np.where(trusted, qn, np.inf)
    i = int(np.argmin(inner))
    if inner[i] < floor:
        raise PositivityError(
            f"density {qn[i]:.3e} below floor {floor:.1e} at node {q.frame.nodes[i]}",
            node=q.frame.nodes[i],
            value=float(qn[i]),
        )
    return qn


def masked_inverses(frame: GaussianFrame, qn: np.ndarray,
                    floor: float = POSITIVITY_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Reciprocals (1/q, 1/sqrt(q)) that vanish on untrusted nodes.

    Rational integrands have no polynomial cancellation structure, so the
    round-off garbage at far-tail nodes would be amplified by the division
    instead of telescoping away in the quadrature sum; restricting them to
    the trusted region discards only contributions below round-off of the
    total (the omitted Gaussian tail).  Polynomial integrands should keep
    the raw nodal values, whose quadrature sums are exact by design.
    """
    qs = np.maximum(qn, floor)
    mask = frame.trusted.astype(float)
    return mask / qs, mask / np.sqrt(qs)


def gradient_nodal(f: ScalarField) -> np.ndarray:
    """Exact nodal gradient, shape (dim, n_nodes)."""
    frame = f.frame
    return np.stack([frame.dV[ax] @ f.coeffs for ax in range(frame.dim)])


def hessian_nodal(f: ScalarField) -> np.ndarray:
    """Exact nodal Hessian, shape (dim, dim, n_nodes)."""
    frame = f.frame
    d = frame.dim
    out = np.empty((d, d, frame.n_nodes))
    for i in range(d):
        for j in range(i, d):
            out[i, j] = frame.d2V[(i, j)] @ f.coeffs
            out[j, i] = out[i, j]
    return out


def div_m(v: VectorField) -> ScalarField:
    """Twisted divergence div(v) - (x/sigma^2).v, truncated to degree N.

    The truncation drops only the degree-(N+1) tail of the coordinate
    product, so the zero-index coefficient of the result vanishes exactly:
    div_m maps into mean-zero fields.
    """
    frame = v.frame
    coeffs = np.zeros(frame.n_basis)
    for ax in range(frame.dim):
        coeffs += frame.divm_mats[ax] @ v.components[ax].coeffs
    return ScalarField(frame, coeffs=coeffs)


def div_m_tensor(t: TensorField) -> VectorField:
    """Row-wise twisted divergence of a tensor field, truncated to degree N."""
    frame = t.frame
    comps = []
    for i in range(frame.dim):
        coeffs = np.zeros(frame.n_basis)
        for j in range(frame.dim):
            coeffs += frame.divm_mats[j] @ t.components[i][j].coeffs
        comps.append(ScalarField(frame, coeffs=coeffs))
    return VectorField(comps)


def grad(q: ScalarField) -> VectorField:
    return VectorField([derivative(q, ax) for ax in range(q.frame.dim)])


def grad_parts(u: VectorField) -> tuple[TensorField, TensorField]:
    """Symmetric/skew split of the velocity gradient: D + A = grad u."""
    frame = u.frame
    d = frame.dim
    g = [[derivative(u.components[i], j) for j in range(d)] for i in range(d)]
    sym = [[0.5 * (g[i][j] + g[j][i]) for j in range(d)] for i in range(d)]
    skw = [[0.5 * (g[i][j] - g[j][i]) for j in range(d)] for i in range(d)]
    return TensorField(sym, symmetry="symmetric"), TensorField(skw, symmetry="skew")


def _capillarity_nodal(q: ScalarField, floor: float) -> np.ndarray:
    """Nodal sqrt(q) D^2 sqrt(q) - grad sqrt(q) x grad sqrt(q), shape (d, d, n).

    Zero on untrusted nodes (rational quantity)."""
    qn = require_positive(q, floor)
    inv_q, _ = masked_inverses(q.frame, qn, floor)
    g = gradient_nodal(q)
    h = hessian_nodal(q)
    mask = q.frame.trusted.astype(float)
    return 0.5 * h * mask - 0.5 * np.einsum("in,jn->ijn", g, g) * inv_q


def _capillarity_rho_form_nodal(q: ScalarField, floor: float) -> np.ndarray:
    """Same stress assembled through rho = q rho_m on the flat measure.

    Computes (1/rho_m)[sqrt(rho) D^2 sqrt(rho) - grad sqrt(rho) (x) grad
    sqrt(rho) + rho I / (2 sigma^2)] from exact nodal derivatives of rho.
    """
    frame = q.frame
    qn = require_positive(q, floor)
    inv_q, _ = masked_inverses(frame, qn, floor)
    mask = frame.trusted.astype(float)
    sig2 = frame.sigma**2
    x = frame.nodes.T  # (d, n)
    gq = gradient_nodal(q)
    hq = hessian_nodal(q)
    # grad rho / rho_m and D^2 rho / rho_m by the Gaussian product rule
    grho = gq - x * qn / sig2
    hrho = (
        hq
        - (np.einsum("in,jn->ijn", x, gq) + np.einsum("in,jn->ijn", gq, x)) / sig2
        + qn * (np.einsum("in,jn->ijn", x, x) / sig2**2 - np.eye(frame.dim)[:, :, None] / sig2)
    )
    eye = np.eye(frame.dim)[:, :, None]
    return (0.5 * hrho + 0.5 * qn * eye / sig2) * mask - 0.5 * np.einsum(
        "in,jn->ijn", grho, grho
    ) * inv_q


def korteweg_tensor(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> TensorField:
    """Capillarity stress of a strictly positive relative density.

    Evaluated nodally; the equivalent flat-measure form (through rho = q
    rho_m) is assembled independently and the two are required to agree in
    the quadrature L^2_mu norm before the tensor is returned.
    """
    frame = q.frame
    s_q = _capillarity_nodal(q, floor)
    s_rho = _capillarity_rho_form_nodal(q, floor)
    mismatch = max(
        frame.norm_l2mu(s_q[i, j] - s_rho[i, j]) for i in range(frame.dim) for j in range(frame.dim)
    )
    scale = max(frame.norm_l2mu(s_q[i, j]) for i in range(frame.dim) for j in range(frame.dim))
    if mismatch > 1e-9 * max(scale, 1.0):
        raise InternalConsistencyError(
            f"capillarity stress q-form and rho-form disagree: {mismatch:.3e}"
        )
    comps = [
        [ScalarField(frame, nodal=s_q[i, j]) for j in range(frame.dim)] for i in range(frame.dim)
    ]
    return TensorField(comps, symmetry="symmetric")


def korteweg_consistency(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> float:
    """Worst quadrature-L^2_mu distance between the two stress assemblies."""
    frame = q.frame
    s_q = _capillarity_nodal(q, floor)
    s_rho = _capillarity_rho_form_nodal(q, floor)
    return max(
        frame.norm_l2mu(s_q[i, j] - s_rho[i, j]) for i in range(frame.dim) for j in range(frame.dim)
    )


def hessian_log(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> TensorField:
    """sqrt(q) D^2(ln q), computed through square roots only."""
    frame = q.frame
    vals = hessian_log_nodal(q, floor)
    comps = [
        [ScalarField(frame, nodal=vals[i, j]) for j in range(frame.dim)] for i in range(frame.dim)
    ]
    return TensorField(comps, symmetry="symmetric")


def hessian_log_nodal(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> np.ndarray:
    """Nodal sqrt(q) D^2(ln q); zero on untrusted nodes (rational quantity)."""
    qn = require_positive(q, floor)
    inv_q, inv_sq = masked_inverses(q.frame, qn, floor)
    g = gradient_nodal(q)
    h = hessian_nodal(q)
    return h * inv_sq - np.einsum("in,jn->ijn", g, g) * inv_q * inv_sq


def _third_derivs_nodal(q: ScalarField) -> np.ndarray:
    frame = q.frame
    d = frame.dim
    out = np.empty((d, d, d, frame.n_nodes))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                key = tuple(sorted((i, j, k)))
                out[i, j, k] = frame.d3V[key] @ q.coeffs
    return out


def bohm_residual(q: ScalarField, floor: float = POSITIVITY_FLOOR) -> float:
    r"""Discrepancy between the two classical forms of the quantum stress.

    For rho = q rho_m the Bohm identity states

    .. math::

        2\rho\nabla\left(\frac{\Delta\sqrt\rho}{\sqrt\rho}\right)
            = {\rm div}(\rho D^2 \ln\rho).

    The left side is evaluated through the square-root route: sqrt(q) is
    projected onto the basis (P), sqrt(rho) = P rho_m^{1/2}, and the cubic
    derivative chain of P is formed nodally.  The right side goes through
    exact derivatives of q itself.  The residual, reported as the
    L^2_mu norm of (LHS - RHS)/rho_m, therefore measures exactly the
    truncation error of representing sqrt(q) at degree N; it vanishes to
    round-off whenever sqrt(q) is resolved.
    """
    frame = q.frame
    d = frame.dim
    sig2 = frame.sigma**2
    qn = require_positive(q, floor)
    mask = frame.trusted.astype(float)
    x = frame.nodes.T

    # --- left side via P = projection of sqrt(q) ------------------------
    qs = np.maximum(qn, floor)
    p_field = ScalarField(frame, coeffs=frame.project_nodal(np.sqrt(qs)))
    pn = p_field.nodal
    if np.min(np.abs(pn[frame.trusted])) < floor:
        raise PositivityError("projected square root vanishes at a trusted node")
    inv_p = mask / np.where(np.abs(pn) > floor, pn, floor)
    gp = gradient_nodal(p_field)
    hp = hessian_nodal(p_field)
    lap_p = np.trace(hp, axis1=0, axis2=1)
    tp = _third_derivs_nodal(p_field)
    grad_lap_p = np.einsum("ijjn->in", tp)
    rsq = frame.radius_sq
    # A := (Delta sqrt(rho)) / rho_m^{1/2} with sqrt(rho) = P rho_m^{1/2}
    a_vals = lap_p - np.einsum("in,in->n", x, gp) / sig2 + pn * (rsq / (4.0 * sig2**2) - d / (2.0 * sig2))
    # grad A, using exact product-rule derivatives of the polynomial pieces
    grad_a = (
        grad_lap_p
        - (gp + np.einsum("in,ijn->jn", x, hp)) / sig2
        + gp * (rsq / (4.0 * sig2**2) - d / (2.0 * sig2))[None, :]
        + pn * x / (2.0 * sig2**2)
    )
    # 2 rho grad(Delta sqrt(rho)/sqrt(rho)) / rho_m = 2 q [grad A / P - A grad P / P^2]
    lhs = 2.0 * qn * (grad_a * inv_p - a_vals * gp * inv_p**2)

    # --- right side via L = ln rho = ln rho_m + ln q ---------------------
    inv_q, _ = masked_inverses(frame, qn, floor)
    gq = gradient_nodal(q)
    hq = hessian_nodal(q)
    tq = _third_derivs_nodal(q)
    grad_l = -x / sig2 * mask + gq * inv_q
    hess_l = (
        -np.eye(d)[:, :, None] / sig2 * mask
        + hq * inv_q
        - np.einsum("in,jn->ijn", gq, gq) * inv_q**2
    )
    # div of D^2(ln q) (the Gaussian part is constant and drops out)
    div_hess = (
        np.einsum("jijn->in", tq) * inv_q
        - np.einsum("ijn,jn->in", hq, gq) * inv_q**2
        - (np.einsum("jjn->n", hq) * gq + np.einsum("ijn,jn->in", hq, gq)) * inv_q**2
        + 2.0 * np.einsum("jn,jn->n", gq, gq) * gq * inv_q**3
    )
    rhs = qn * (np.einsum("ijn,jn->in", hess_l, grad_l) + div_hess)

    diff = (lhs - rhs) * mask
    return math.sqrt(sum(frame.quad(diff[i] ** 2) for i in range(d)))


def rho_of_q(q: ScalarField) -> np.ndarray:
    """Flat-measure density values at the quadrature nodes: rho = q rho_m."""
    return q.nodal * q.frame.rho_m_nodes


def q_of_rho(frame: GaussianFrame, rho_nodal: np.ndarray) -> ScalarField:
    """Relative density from flat-measure nodal values: q = rho / rho_m.

    Gauss-Hermite nodes stay well inside the support of rho_m, so the
    division never underflows at desk scale.
    """
    rho_nodal = np.asarray(rho_nodal, dtype=float)
    if rho_nodal.shape != (frame.n_nodes,):
        raise InvalidParameterError(f"expected {frame.n_nodes} nodal values")
    return ScalarField(frame, nodal=rho_nodal / frame.rho_m_nodes)
