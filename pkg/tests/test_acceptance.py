"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one pass/fail line; run with ``pytest -s`` to see them all.
Shared trajectories live in module-scoped fixtures so the whole gate stays
inside a few minutes.
"""

import math

import numpy as np
import pytest

from hermflow import (
    ModelParams,
    ScalarField,
    VectorField,
    build_frame,
    check_hessian_lemma,
    check_log_sobolev,
    coupled_step,
    i2_ode_residual,
    make_initial_state,
    ou_semigroup,
    sigma_from_coefficients,
)
from hermflow.calculus import bohm_residual, korteweg_consistency
from hermflow.continuation import vanishing_drag_sweep
from hermflow.diagnostics import energy_inequality_audit
from hermflow.driver import simulate
from hermflow.rescaled import (
    combined_identity_residual,
    rescaled_bd_remainder,
    rescaled_energy,
    rescaled_step,
    tau_energy,
    tau_rhs,
    tau_solve,
)
from hermflow.sampling import random_density, tilted_density

#: single pinned constant for the energy/entropy inequality audits:
#: violations must stay below AUDIT_SLOPE * dt on the declared ladder
AUDIT_SLOPE = 0.01
DT_LADDER = (4e-3, 2e-3, 1e-3)


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def oscillation_run():
    """Shifted equilibrium at lam = 4 over one full period."""
    frame = build_frame(1.0, 1.0, 4.0, 1, 24)
    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=4.0)
    x0 = 0.2
    q0 = tilted_density(frame, x0 / frame.sigma**2)
    result = simulate(frame, params, q0, VectorField.zero(frame),
                      dt=1e-3, t_final=round(math.pi, 3))
    return frame, params, x0, result


@pytest.fixture(scope="module")
def oscillation_ladder():
    """Same physics over a shorter window at three step sizes."""
    frame = build_frame(1.0, 1.0, 4.0, 1, 24)
    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=4.0)
    q0 = tilted_density(frame, 0.2 / frame.sigma**2)
    runs = {dt: simulate(frame, params, q0, VectorField.zero(frame), dt=dt, t_final=0.4)
            for dt in DT_LADDER}
    return frame, params, runs


@pytest.fixture(scope="module")
def drag_ladder():
    """Regularized run (all drags and diffusion on) at three step sizes."""
    frame = build_frame(1.0, 1.0, 2.0, 1, 16)
    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=2.0,
                         r0=0.1, r1=0.1, r4=0.05, delta1=0.5)
    q0 = tilted_density(frame, 0.1)
    runs = {dt: simulate(frame, params, q0, VectorField.zero(frame), dt=dt, t_final=0.2)
            for dt in DT_LADDER}
    return frame, params, runs


@pytest.fixture(scope="module")
def drag_sweep_report():
    """Vanishing-drag continuation on a tightly confined frame."""
    frame = build_frame(1.0, 0.5, 100.0, 1, 16)
    params = ModelParams(a=1.0, kappa=0.5, nu=0.5, lam=100.0)
    q0 = tilted_density(frame, 0.25 / frame.sigma)
    report_ = vanishing_drag_sweep(frame, params, q0, VectorField.zero(frame),
                                   [4, 8, 16, 32], dt=2e-3, t_final=0.5,
                                   record_every=10, burn_in=8)
    return report_


def all_records(oscillation_run, drag_ladder):
    _, _, _, osc = oscillation_run
    recs = list(osc.records)
    for run in drag_ladder[2].values():
        recs.extend(run.records)
    return recs


def test_criterion_01_sigma_equation():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        a = 10.0 ** rng.uniform(-1.0, 1.0)
        kappa = 10.0 ** rng.uniform(-1.0, 0.5)
        lam = 10.0 ** rng.uniform(-1.0, 1.0)
        s = sigma_from_coefficients(a, kappa, lam)
        worst = max(worst, abs(a / s**2 + kappa**2 / s**4 - lam))
    report(1, worst < 1e-12, f"sigma-equation residual over 50 triples: {worst:.3e} < 1e-12")


def test_criterion_02_ou_semigroup_eigenexact():
    frame = build_frame(1.0, 1.0, 2.0, 1, 32)
    delta1, t = 0.37, 0.83
    q = ScalarField(frame, coeffs=np.ones(frame.n_basis))
    out = ou_semigroup(q, t, delta1)
    expected = np.exp(-delta1 * frame.total_degree * t / frame.sigma**2)
    worst = float(np.max(np.abs(out.coeffs - expected)))
    report(2, worst < 1e-11, f"per-mode decay error over all k <= N: {worst:.3e} < 1e-11")


def test_criterion_03_steady_state():
    frame = build_frame(1.0, 1.0, 2.0, 1, 16)
    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=2.0)
    coeffs = np.zeros(frame.n_basis)
    coeffs[0] = 1.0
    state = make_initial_state(ScalarField(frame, coeffs=coeffs), VectorField.zero(frame))
    for _ in range(1000):
        state = coupled_step(state, params, 1e-3)
    q_dev = float(np.max(np.abs(state.q.nodal - 1.0)))
    u_norm = float(np.linalg.norm(state.u.coeffs))
    report(3, q_dev < 1e-8 and u_norm < 1e-8,
           f"after 1000 steps: |q-1|_inf = {q_dev:.2e} < 1e-8, |u| = {u_norm:.2e} < 1e-8")


def test_criterion_04_mass_conservation(oscillation_run, drag_ladder, drag_sweep_report):
    recs = all_records(oscillation_run, drag_ladder)
    worst = max(abs(r.mass - 1.0) for r in recs)
    worst = max(worst, max(a["mass_error"] for a in drag_sweep_report["audits"]))
    report(4, worst < 1e-10, f"max |mass - 1| over every recorded time: {worst:.3e} < 1e-10")


def test_criterion_05_mean_dynamics(oscillation_run):
    _, _, x0, result = oscillation_run
    t = np.array([r.t for r in result.records])
    mx = np.array([r.mx[0] for r in result.records])
    exact = x0 * np.cos(2.0 * t)
    rel = float(np.linalg.norm(mx - exact) / np.linalg.norm(exact))
    report(5, rel < 0.01, f"mean position vs x0 cos(2t) over one period: rel L2 {rel:.2e} < 1%")


def test_criterion_06_energy_and_bd_inequalities(drag_ladder):
    frame, params, runs = drag_ladder
    rows = []
    ok = True
    for dt, run in runs.items():
        audit = energy_inequality_audit(run.records, params, frame.sigma, frame.dim)
        ok = ok and audit["energy_violation"] <= AUDIT_SLOPE * dt
        ok = ok and audit["bd_violation"] <= AUDIT_SLOPE * dt
        ok = ok and run.envelope_ok
        rows.append(f"dt={dt}: E {audit['energy_violation']:.1e}, BD {audit['bd_violation']:.1e}")
    report(6, ok, f"violations <= {AUDIT_SLOPE}*dt on the ladder, envelopes respected "
                  f"({'; '.join(rows)})")


def test_criterion_07_bd_entropy_nonnegative(oscillation_run, drag_ladder):
    worst = min(r.e_bd for r in all_records(oscillation_run, drag_ladder))
    report(7, worst >= -1e-12, f"min BD entropy over every recorded state: {worst:.3e} >= 0")


def test_criterion_08_hessian_lemma():
    worst = math.inf
    rng = np.random.default_rng(808)
    for frame, count in ((build_frame(1.0, 1.0, 2.0, 1, 20), 50),
                         (build_frame(1.0, 1.0, 2.0, 2, 10), 50)):
        for _ in range(count):
            q = random_density(frame, rng)
            _, _, _, _, mid, fin = check_hessian_lemma(q)
            worst = min(worst, mid, fin)
    report(8, worst >= -1e-8,
           f"min Hessian-lemma margin over 100 densities, d in (1,2): {worst:.3e} >= -1e-8")


def test_criterion_09_log_sobolev():
    rng = np.random.default_rng(909)
    worst = math.inf
    for frame, count in ((build_frame(1.0, 1.0, 2.0, 1, 20), 120),
                         (build_frame(1.0, 1.0, 2.0, 2, 10), 80)):
        for _ in range(count):
            worst = min(worst, check_log_sobolev(random_density(frame, rng)))
    tilt_frame = build_frame(1.0, 1.0, 2.0, 1, 32)
    tilt_margin = abs(check_log_sobolev(tilted_density(tilt_frame, 0.5)))
    ok = worst >= -1e-8 and tilt_margin < 1e-6
    report(9, ok, f"min margin over 200 densities {worst:.3e} >= -1e-8; "
                  f"tilt extremizer |margin| {tilt_margin:.2e} < 1e-6")


def test_criterion_10_bohm_and_korteweg():
    rng = np.random.default_rng(1010)
    frame = build_frame(1.0, 1.0, 2.0, 1, 24)
    worst_bohm = 0.0
    for _ in range(20):
        q = random_density(frame, rng, decay=0.25, amplitude=0.3)
        worst_bohm = max(worst_bohm, bohm_residual(q))
    worst_bohm = max(worst_bohm, bohm_residual(tilted_density(frame, 0.4)))
    worst_kort = 0.0
    for fr in (frame, build_frame(1.0, 1.0, 2.0, 2, 10)):
        for _ in range(25):
            worst_kort = max(worst_kort, korteweg_consistency(random_density(fr, rng)))
    ok = worst_bohm < 1e-8 and worst_kort < 1e-10
    report(10, ok, f"Bohm residual {worst_bohm:.2e} < 1e-8 on smooth densities; "
                   f"stress-form agreement {worst_kort:.2e} < 1e-10")


def test_criterion_11_dilation_ode():
    exact0 = tau_rhs(1.0, 0.0, 1.0, 1.0, 0.7) == 1.0 + 1.0**2
    traj = tau_solve(1.0, 1.0, 0.0, 100.0, 1e-3, store_every=500)
    e0 = tau_energy(traj[0], 1.0, 1.0)
    drift = max(abs(tau_energy(s, 1.0, 1.0) - e0) for s in traj)
    far = tau_solve(1.0, 1.0, 0.0, 1000.0, 1e-2, store_every=100000)
    ratio = far[-1].tau / (1000.0 * math.sqrt(2.0 * math.log(1000.0)))
    ok = exact0 and drift < 1e-8 and 0.8 <= ratio <= 1.2
    report(11, ok, f"tau''(0) = a + kappa^2 exactly; inviscid invariant drift "
                   f"{drift:.2e} < 1e-8 over [0,100]; tau/(t sqrt(2a ln t)) = {ratio:.3f}")


def test_criterion_12_rescaled_combined_identity():
    frame = build_frame(1.0, 1.0, 2.0, 1, 16)  # sigma = 1
    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=2.0)
    q0 = tilted_density(frame, 0.3)
    resids = []
    t_final = 0.2
    for dt in (8e-3, 4e-3, 2e-3):
        taus = tau_solve(1.0, 1.0, 0.5, t_final, dt / 2.0)
        q, u = q0, VectorField.zero(frame)
        energies = [rescaled_energy(q, u, taus[0], params)]
        rems = [rescaled_bd_remainder(q, u, taus[0], params)]
        for k in range(int(round(t_final / dt))):
            q, u = rescaled_step(q, u, taus[2 * k + 1], params, dt)
            energies.append(rescaled_energy(q, u, taus[2 * k + 2], params))
            rems.append(rescaled_bd_remainder(q, u, taus[2 * k + 2], params))
        resids.append(combined_identity_residual(energies, dt, rems))
    orders = [math.log2(resids[i] / resids[i + 1]) for i in range(2)]
    report(12, min(orders) >= 1.0,
           f"combined-balance residual orders {[f'{o:.2f}' for o in orders]} >= 1 "
           f"(residuals {[f'{r:.2e}' for r in resids]})")


def test_criterion_13_vanishing_drag_sweep(drag_sweep_report):
    rep = drag_sweep_report
    completed = rep["failed_at"] is None
    audits_ok = all(
        a["mass_error"] < 1e-10
        and a["ebd_min"] >= -1e-12
        and a["energy_violation"] <= AUDIT_SLOPE * 2e-3
        and a["bd_violation"] <= 20.0 * 2e-3
        for a in rep["audits"]
    )
    incs = [i["sqrtq_h1"] for i in rep["increments"]]
    ok = completed and audits_ok and rep["cauchy_monotone_after_burn_in"]
    report(13, ok, f"sweep n in (4,8,16,32): increments {[f'{v:.3e}' for v in incs]} "
                   f"non-increasing after n=8; per-run audits pass")


def test_criterion_14_second_moment_equation(oscillation_ladder):
    from test_diagnostics import TestSecondMomentEquation

    params = ModelParams(a=1.0, kappa=1.0, nu=0.5, lam=2.0)
    recs = TestSecondMomentEquation.manufactured_records(params, 1.0, 1e-2, 201)
    manufactured = i2_ode_residual(recs, params, 1.0)

    frame, osc_params, runs = oscillation_ladder
    resids = [i2_ode_residual(runs[dt].records, osc_params, frame.sigma) for dt in DT_LADDER]
    slopes = [math.log2(resids[i] / resids[i + 1]) for i in range(2)]
    ok = manufactured < 1e-8 and min(slopes) >= 1.6
    report(14, ok, f"manufactured residual {manufactured:.2e} < 1e-8; simulated residual "
                   f"refinement slopes {[f'{s:.2f}' for s in slopes]} (order ~2)")
