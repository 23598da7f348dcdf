r"""Mollified initial data, vanishing drag schedules and the drag-limit sweep.

Rough initial data enter the solver through a cutoff-convolve-normalize
pipeline on the square root of the density,

.. math::

    \sqrt{q^0_n} = \frac{(\sqrt{q^0}\,\chi_n + 1/n) * \zeta_n}
                        {\|(\sqrt{q^0}\,\chi_n + 1/n) * \zeta_n\|_{L^2_{\mu_m}}},
    \qquad
    u^0_n = \frac{\sqrt{q^0}\,u^0}{\sqrt{q^0_n}}\,\chi_n,

with :math:`\chi_n(x) = \chi(x/n)` a fixed C^2 plateau cutoff and
:math:`\zeta_n(x) = n^d\zeta(n x)` a unit-mass polynomial bump supported in
the unit ball.  Both kernels are polynomial splines so the construction is
reproducible without transcendental-support ambiguity.

The drag coefficients are scheduled against the mollified data so that the
products that enter the entropy bounds vanish even when the underlying
moments blow up:

.. math::

    r_{1,n} = 1/n, \qquad
    r_{0,n} = \frac{1}{n + (\int (q^0_n - \ln q^0_n)\,{\rm d}\mu_m)^2}, \qquad
    r_{4,n} = \frac{1}{n + I_4(q^0_n)^2}.

``vanishing_drag_sweep`` runs the full solver per schedule index and
reports Cauchy increments of the square-root density (weighted H^1) and
momentum (weighted L^2) between consecutive runs; the increments should
decay once past a burn-in index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from .calculus import ModelParams, gradient_nodal
from .errors import InvalidParameterError
from .spectral import GaussianFrame, ScalarField, VectorField

__all__ = [
    "DragSchedule",
    "mollify_initial_data",
    "drag_schedule",
    "vanishing_drag_sweep",
    "renormalization_cutoff",
]


@dataclass(frozen=True)
class DragSchedule:
    """One member of the vanishing-drag family."""

    n: int
    r0n: float
    r1n: float
    r4n: float
    delta1n: float
    entropy_product: float  # r0n * int (q - ln q)
    moment_product: float   # r4n * I4

    def __post_init__(self):
        for name in ("r0n", "r1n", "r4n", "delta1n"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise InvalidParameterError(f"{name} must lie in (0, 1], got {val}")


def _plateau_cutoff(r: np.ndarray) -> np.ndarray:
    """C^2 radial plateau: 1 on r <= 1/2, 0 on r >= 1, quintic in between."""
    t = np.clip((r - 0.5) * 2.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _bump(frame_dim: int, y: np.ndarray) -> np.ndarray:
    """Unit-mass C^2 bump c_d (1 - |y|^2)^3 on the unit ball."""
    r2 = np.sum(np.atleast_2d(y) ** 2, axis=-1)
    vals = np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0)
    const = 35.0 / 32.0 if frame_dim == 1 else 4.0 / math.pi
    return const * vals


def mollify_initial_data(q0: ScalarField, u0: VectorField, n: int,
                         oversample: int = 4) -> tuple[ScalarField, VectorField]:
    """Cutoff, convolve and renormalize one initial state.

    Convolutions are evaluated on a uniform grid covering the quadrature
    hull plus the kernel support, ``oversample`` times finer than the node
    spacing, then interpolated back to the quadrature nodes and projected.
    The returned density has unit quadrature mass exactly (explicit
    normalization) and a strictly positive nodal floor of order 1/n.
    """
    if n < 1:
        raise InvalidParameterError(f"mollification index must be >= 1, got {n}")
    frame = q0.frame
    d = frame.dim
    span = frame.nodes_1d[-1] - frame.nodes_1d[0]
    h = span / (frame.quad_order - 1) / oversample
    margin = 1.0 / n + 2.0 * h
    lo, hi = frame.nodes_1d[0] - margin, frame.nodes_1d[-1] + margin
    npts = int(math.ceil((hi - lo) / h)) + 1
    axis = np.linspace(lo, hi, npts)
    step = axis[1] - axis[0]

    if d == 1:
        grid_pts = axis[:, None]
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        grid_pts = np.column_stack([gx.ravel(), gy.ravel()])

    sq0 = np.sqrt(np.clip(q0.eval(grid_pts), 0.0, None))
    chi = _plateau_cutoff(np.sqrt(np.sum(grid_pts**2, axis=1)) / n)
    g = (sq0 * chi + 1.0 / n).reshape((npts,) * d)

    # mollifier sampled on its own support, normalized discretely so that
    # the convolution preserves constants exactly
    m = int(math.ceil(1.0 / (n * step)))
    ky = np.arange(-m, m + 1) * step
    if d == 1:
        kernel = _bump(d, (n * ky)[:, None]) * n
    else:
        kx, kyy = np.meshgrid(ky, ky, indexing="ij")
        kernel = _bump(d, n * np.stack([kx, kyy], axis=-1)) * n**d
    kernel = kernel * step**d
    kernel = kernel / kernel.sum()
    smooth = fftconvolve(g, kernel, mode="same")

    if d == 1:
        interp = RegularGridInterpolator((axis,), smooth, method="cubic")
        s_nodes = interp(frame.nodes)
    else:
        interp = RegularGridInterpolator((axis, axis), smooth, method="cubic")
        s_nodes = interp(frame.nodes)

    norm = math.sqrt(frame.quad(s_nodes**2))
    s_nodes = s_nodes / norm
    qn = ScalarField(frame, nodal=s_nodes**2)

    chi_nodes = _plateau_cutoff(np.sqrt(frame.radius_sq) / n)
    sq0_nodes = np.sqrt(np.clip(q0.nodal, 0.0, None))
    u_comps = []
    for c in u0.components:
        vals = sq0_nodes * c.nodal / s_nodes * chi_nodes
        u_comps.append(ScalarField(frame, nodal=vals))
    return qn, VectorField(u_comps)


def drag_schedule(n: int, q0_n: ScalarField) -> DragSchedule:
    """Vanishing coefficients tied to the mollified data's entropic moments."""
    if n < 1:
        raise InvalidParameterError(f"schedule index must be >= 1, got {n}")
    frame = q0_n.frame
    qn = np.clip(q0_n.nodal, 1e-300, None)
    entropic = frame.quad(qn - np.log(qn))
    i4 = frame.quad(qn * frame.radius_sq**2) / frame.sigma**4
    r0n = 1.0 / (n + entropic**2)
    r1n = 1.0 / n
    r4n = 1.0 / (n + i4**2)
    return DragSchedule(
        n=n,
        r0n=r0n,
        r1n=r1n,
        r4n=r4n,
        delta1n=1.0 / n,
        entropy_product=r0n * entropic,
        moment_product=r4n * i4,
    )


def renormalization_cutoff(y, l: float):
    """Trapezoid cutoff phi_l: ramps on [1/2l, 1/l], plateau 1 on [1/l, l],
    ramps down on [l, 2l]; pointwise -> 1 as l grows."""
    if l < 1.0:
        raise InvalidParameterError(f"cutoff level must be >= 1, got {l}")
    y = np.asarray(y, dtype=float)
    up = (2.0 * l * y - 1.0) * ((y >= 1.0 / (2.0 * l)) & (y < 1.0 / l))
    mid = 1.0 * ((y >= 1.0 / l) & (y <= l))
    down = (2.0 - y / l) * ((y > l) & (y <= 2.0 * l))
    return up + mid + down


def _sqrtq_h1_distance(qa: ScalarField, qb: ScalarField) -> float:
    """Weighted H^1 distance of the square roots over trusted nodes."""
    frame = qa.frame
    mask = frame.trusted.astype(float)
    sa, sb = np.sqrt(np.clip(qa.nodal, 0.0, None)), np.sqrt(np.clip(qb.nodal, 0.0, None))
    ga = gradient_nodal(qa) * mask / (2.0 * np.clip(sa, 1e-150, None))
    gb = gradient_nodal(qb) * mask / (2.0 * np.clip(sb, 1e-150, None))
    val = frame.quad(mask * (sa - sb) ** 2) + frame.quad(
        np.einsum("in,in->n", ga - gb, ga - gb)
    )
    return math.sqrt(max(val, 0.0))


def _momentum_l2_distance(qa: ScalarField, ua: VectorField,
                          qb: ScalarField, ub: VectorField) -> float:
    frame = qa.frame
    mask = frame.trusted.astype(float)
    sa, sb = np.sqrt(np.clip(qa.nodal, 0.0, None)), np.sqrt(np.clip(qb.nodal, 0.0, None))
    diff = (sa * ua.nodal - sb * ub.nodal) * mask
    return math.sqrt(max(frame.quad(np.einsum("in,in->n", diff, diff)), 0.0))


def vanishing_drag_sweep(frame: GaussianFrame, base_params: ModelParams,
                         q0: ScalarField, u0: VectorField, n_list,
                         dt: float, t_final: float, record_every: int = 1,
                         burn_in: int = 8) -> dict:
    """Run the solver once per schedule index and compare consecutive runs.

    Returns a report with per-run schedules and audits plus the Cauchy
    increments sup_t ||sqrt(q_n) - sqrt(q_m)||_{H^1_mu} and
    sup_t ||sqrt(q_n) u_n - sqrt(q_m) u_m||_{L^2_mu} for consecutive (n, m).
    Raises nothing on a member failure: the report carries the failure
    index and whatever completed.
    """
    from .diagnostics import energy_inequality_audit
    from .driver import simulate

    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidParameterError("n_list must be strictly increasing")
    runs = []
    report: dict = {"n_list": n_list, "schedules": [], "audits": [], "failed_at": None}
    for n in n_list:
        q0n, u0n = mollify_initial_data(q0, u0, n)
        sched = drag_schedule(n, q0n)
        params = ModelParams(
            a=base_params.a, kappa=base_params.kappa, nu=base_params.nu,
            lam=base_params.lam, r0=sched.r0n, r1=sched.r1n, r4=sched.r4n,
            delta1=sched.delta1n,
        )
        report["schedules"].append(
            {"n": n, "r0": sched.r0n, "r1": sched.r1n, "r4": sched.r4n,
             "delta1": sched.delta1n}
        )
        try:
            result = simulate(frame, params, q0n, u0n, dt=dt, t_final=t_final,
                              record_every=record_every, keep_states=True)
        except Exception as exc:  # member failure: partial report
            report["failed_at"] = n
            report["failure"] = f"{type(exc).__name__}: {exc}"
            break
        runs.append((n, params, result))
        report["audits"].append(
            energy_inequality_audit(result.records, params, frame.sigma, frame.dim)
        )

    increments = []
    for (na, _, ra), (nb, _, rb) in zip(runs, runs[1:]):
        dq = max(
            _sqrtq_h1_distance(sa.q, sb.q) for sa, sb in zip(ra.states, rb.states)
        )
        dj = max(
            _momentum_l2_distance(sa.q, sa.u, sb.q, sb.u)
            for sa, sb in zip(ra.states, rb.states)
        )
        increments.append({"pair": (na, nb), "sqrtq_h1": dq, "momentum_l2": dj})
    report["increments"] = increments

    tail = [inc for inc in increments if inc["pair"][0] >= burn_in]
    monotone = all(
        b["sqrtq_h1"] <= a["sqrtq_h1"] * (1.0 + 1e-9) + 1e-14
        and b["momentum_l2"] <= a["momentum_l2"] * (1.0 + 1e-9) + 1e-14
        for a, b in zip(tail, tail[1:])
    )
    report["cauchy_monotone_after_burn_in"] = bool(monotone)
    return report
