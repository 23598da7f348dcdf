"""Command-line runner: simulate, verify, sweep and rescaled modes.

Artifacts land in the configured output directory:

* ``trajectory.csv`` with one diagnostics row per recorded time, columns
  (in fixed order) t, mass, E_reg, D_reg, E_BD, D_BD, I2, I2_tilde, I4,
  Mx_*, Mu_*, min_q, max_q, lsi_margin, hess_margin_mid, hess_margin_final,
  poincare_q, poincare_korn_u, floats printed with 17 significant digits;
* ``summary.json`` with the config echo, audit verdicts and worst margins;
* optional ``state.npz`` spectral snapshot of the final state.

Exit codes: 0 success with all audits passing, 1 completed with an audit
violation, 2 solver failure (fixed point or positivity), 3 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .calculus import ModelParams, bohm_residual, korteweg_consistency
from .config import RunConfig, load_config
from .continuation import mollify_initial_data, vanishing_drag_sweep
from .driver import simulate
from .errors import (
    ConfigError,
    InternalConsistencyError,
    PositivityError,
    StepFailureError,
)
from .galerkin import project_initial_velocity
from .rescaled import (
    combined_identity_residual,
    rescaled_bd_remainder,
    rescaled_energy,
    rescaled_step,
    tau_solve,
)
from .sampling import random_density, random_velocity, tilted_density
from .spectral import GaussianFrame, ScalarField, VectorField, build_frame

MARGIN_TOL = -1e-8


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _make_frame(cfg: RunConfig, force_unit_sigma: bool = False) -> GaussianFrame:
    if force_unit_sigma:
        return GaussianFrame(1.0, cfg.dim, cfg.degree, cfg.quad_order)
    return build_frame(cfg.a, cfg.kappa, cfg.lam, cfg.dim, cfg.degree, cfg.quad_order)


def _initial_state(cfg: RunConfig, frame: GaussianFrame):
    rng = np.random.default_rng(cfg.seed)
    if cfg.family == "steady":
        q0 = ScalarField(frame, coeffs=np.eye(frame.n_basis)[0])
        u0 = VectorField.zero(frame)
    elif cfg.family == "tilted":
        q0 = tilted_density(frame, cfg.alpha)
        u0 = VectorField.zero(frame)
    elif cfg.family == "random":
        q0 = random_density(frame, rng, decay=cfg.decay, amplitude=cfg.amplitude)
        u0 = random_velocity(frame, rng, decay=cfg.decay, amplitude=cfg.u_scale) \
            if cfg.u_scale else VectorField.zero(frame)
    else:  # family == "file", existence checked at parse time
        data = np.load(cfg.path)
        q0 = ScalarField(frame, coeffs=np.asarray(data["q_coeffs"], dtype=float))
        u0 = VectorField.from_coeffs(frame, np.asarray(data["u_coeffs"], dtype=float))
    if cfg.u_scale and cfg.family in ("steady", "tilted"):
        # linear boost u = u_scale * x, projected with the q0 weight
        u0 = project_initial_velocity(q0, cfg.u_scale * frame.nodes.T.copy())
    if float(np.min(q0.nodal[frame.trusted])) <= 0.0:
        # data without a two-sided positive bound enter through the
        # cutoff-convolve-normalize pipeline first
        q0, u0 = mollify_initial_data(q0, u0, n=8)
    return q0, u0


def _write_trajectory(path: Path, records, dim: int) -> None:
    header = diagnostics.csv_header(dim)
    lines = [",".join(header)]
    for rec in records:
        lines.append(",".join(_fmt(v) for v in diagnostics.csv_row(rec)))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run(cfg: RunConfig) -> int:
    """Simulate mode: march the confined system and audit the trajectory."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = _make_frame(cfg)
    params = ModelParams(a=cfg.a, kappa=cfg.kappa, nu=cfg.nu, lam=cfg.lam,
                         r0=cfg.r0, r1=cfg.r1, r4=cfg.r4, delta1=cfg.delta1)
    q0, u0 = _initial_state(cfg, frame)
    try:
        result = simulate(frame, params, q0, u0, dt=cfg.dt, t_final=cfg.t_final,
                          record_every=cfg.record_every)
    except (PositivityError, StepFailureError, InternalConsistencyError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    records = result.records
    _write_trajectory(out / "trajectory.csv", records, frame.dim)
    audit = diagnostics.energy_inequality_audit(records, params, frame.sigma, frame.dim)
    worst_lsi = min(r.lsi_margin for r in records)
    worst_hess = min(min(r.hess_margin_mid, r.hess_margin_final) for r in records)
    audit_tol = 10.0 * cfg.dt
    verdicts = {
        "mass_ok": audit["mass_error"] < 1e-10,
        "ebd_nonnegative": audit["ebd_min"] >= MARGIN_TOL,
        "energy_inequality_ok": audit["energy_violation"] <= audit_tol,
        "bd_inequality_ok": audit["bd_violation"] <= audit_tol,
        "envelope_ok": result.envelope_ok,
        "margins_ok": worst_lsi >= MARGIN_TOL and worst_hess >= MARGIN_TOL,
    }
    summary = {
        "config": cfg.raw,
        "t_final": records[-1].t,
        "final_mass": records[-1].mass,
        "final_energy": records[-1].e_reg,
        "audit": audit,
        "worst_lsi_margin": worst_lsi,
        "worst_hessian_margin": worst_hess,
        "verdicts": verdicts,
    }
    if cfg.save_state:
        np.savez(out / "state.npz", t=result.final_state.t,
                 q_coeffs=result.final_state.q.coeffs,
                 u_coeffs=result.final_state.u.coeffs)
        summary["state_file"] = "state.npz"
    ok = all(verdicts.values())
    summary["exit_code"] = 0 if ok else 1
    _write_json(out / "summary.json", summary)
    for name, good in verdicts.items():
        print(f"{name}: {'pass' if good else 'FAIL'}")
    return 0 if ok else 1


def verify(cfg: RunConfig) -> int:
    """Verify mode: inequality suite over seeded random fields."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = _make_frame(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for k in range(cfg.n_samples):
        q = random_density(frame, rng, decay=cfg.decay, amplitude=cfg.amplitude)
        u = random_velocity(frame, rng, decay=cfg.decay, amplitude=1.0)
        lsi_main, lsi_alt = diagnostics.lsi_margins(q)
        _, _, _, _, hmid, hfin = diagnostics.check_hessian_lemma(q)
        rows.append({
            "sample": k,
            "lsi_margin": lsi_main,
            "lsi_margin_alt_constant": lsi_alt,
            "hess_margin_mid": hmid,
            "hess_margin_final": hfin,
            "poincare_q": diagnostics.poincare_ratio(q),
            "poincare_korn_u": diagnostics.poincare_korn_ratio(u),
            "korteweg_mismatch": korteweg_consistency(q),
            "bohm_residual": bohm_residual(q),
        })
    tilt = tilted_density(frame, 0.4)
    tilt_margin = diagnostics.check_log_sobolev(tilt)

    def col(name):
        return [r[name] for r in rows]

    report = {
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "frame": repr(frame),
        "min_lsi_margin": min(col("lsi_margin")),
        "min_lsi_margin_alt_constant": min(col("lsi_margin_alt_constant")),
        "min_hess_margin_mid": min(col("hess_margin_mid")),
        "min_hess_margin_final": min(col("hess_margin_final")),
        "max_poincare_q": max(col("poincare_q")),
        "max_poincare_korn_u": max(col("poincare_korn_u")),
        "max_korteweg_mismatch": max(col("korteweg_mismatch")),
        "max_bohm_residual": max(col("bohm_residual")),
        "tilt_extremizer_lsi_margin": tilt_margin,
    }
    # exit on the inequality margins; the Bohm residual tracks how well the
    # samples resolve their square roots and is reported, not gated
    ok = (
        report["min_lsi_margin"] >= MARGIN_TOL
        and report["min_hess_margin_mid"] >= MARGIN_TOL
        and report["min_hess_margin_final"] >= MARGIN_TOL
        and report["max_korteweg_mismatch"] < 1e-10
        and abs(report["tilt_extremizer_lsi_margin"]) < 1e-6
        and np.isfinite(report["max_poincare_q"])
        and np.isfinite(report["max_poincare_korn_u"])
    )
    report["exit_code"] = 0 if ok else 1
    _write_json(out / "margins.json", {"summary": report, "samples": rows})
    width = max(len(k) for k in report)
    for key, val in report.items():
        print(f"{key:<{width}}  {val}")
    return 0 if ok else 1


def sweep(cfg: RunConfig) -> int:
    """Sweep mode: vanishing-drag continuation study."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = _make_frame(cfg)
    params = ModelParams(a=cfg.a, kappa=cfg.kappa, nu=cfg.nu, lam=cfg.lam)
    q0, u0 = _initial_state(cfg, frame)
    report = vanishing_drag_sweep(frame, params, q0, u0, cfg.n_list,
                                  dt=cfg.dt, t_final=cfg.t_final,
                                  record_every=cfg.record_every)
    _write_json(out / "sweep_report.json", report)
    if report["failed_at"] is not None:
        print(f"sweep member n={report['failed_at']} failed: {report['failure']}",
              file=sys.stderr)
        return 2
    for inc in report["increments"]:
        print(f"n={inc['pair'][0]}->{inc['pair'][1]}: "
              f"sqrtq_h1={inc['sqrtq_h1']:.6e} momentum_l2={inc['momentum_l2']:.6e}")
    audits_ok = all(
        a["mass_error"] < 1e-10 and a["ebd_min"] >= MARGIN_TOL
        and a["energy_violation"] <= 10.0 * cfg.dt and a["bd_violation"] <= 20.0 * cfg.dt
        for a in report["audits"]
    )
    ok = report["cauchy_monotone_after_burn_in"] and audits_ok
    print(f"cauchy_monotone_after_burn_in: {report['cauchy_monotone_after_burn_in']}")
    return 0 if ok else 1


def rescaled_run(cfg: RunConfig) -> int:
    """Rescaled mode: dilated system on the unit-Gaussian frame."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = _make_frame(cfg, force_unit_sigma=True)
    params = ModelParams(a=cfg.a, kappa=cfg.kappa, nu=cfg.nu, lam=cfg.lam)
    q0, u0 = _initial_state(cfg, frame)
    n_steps = int(round(cfg.t_final / cfg.dt))
    taus = tau_solve(cfg.a, cfg.kappa, cfg.nu, cfg.t_final, cfg.dt / 2.0)
    q, u = q0, u0
    energies = [rescaled_energy(q, u, taus[0], params)]
    remainders = [rescaled_bd_remainder(q, u, taus[0], params)]
    rows = [(0.0, taus[0].tau, taus[0].tau_dot, float(q.coeffs[0]))
            + energies[0] + (remainders[0],)]
    try:
        for k in range(n_steps):
            tau_mid = taus[2 * k + 1]
            q, u = rescaled_step(q, u, tau_mid, params, cfg.dt)
            tau_end = taus[2 * k + 2]
            energies.append(rescaled_energy(q, u, tau_end, params))
            remainders.append(rescaled_bd_remainder(q, u, tau_end, params))
            rows.append((tau_end.t, tau_end.tau, tau_end.tau_dot,
                         float(q.coeffs[0])) + energies[-1] + (remainders[-1],))
    except (PositivityError, StepFailureError, InternalConsistencyError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    header = ["t", "tau", "tau_dot", "mass", "E_tau", "D_tau", "E_BD_tau",
              "D_BD_tau", "bd_remainder"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    (out / "trajectory.csv").write_text("\n".join(lines) + "\n")
    residual = combined_identity_residual(energies, cfg.dt, remainders)
    naive = combined_identity_residual(energies, cfg.dt)
    mass_err = max(abs(r[3] - 1.0) for r in rows)
    ok = mass_err < 1e-10
    summary = {
        "config": cfg.raw,
        "combined_identity_residual": residual,
        "combined_identity_residual_without_remainder": naive,
        "mass_error": mass_err,
        "final_tau": rows[-1][1],
        "exit_code": 0 if ok else 1,
    }
    _write_json(out / "summary.json", summary)
    print(f"combined_identity_residual: {residual:.6e} (without twist remainder: {naive:.6e})")
    return 0 if ok else 1


_DISPATCH = {"simulate": run, "verify": verify, "sweep": sweep, "rescaled": rescaled_run}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hermflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _DISPATCH:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the run configuration file")
        p.add_argument("--output-dir", default=None, help="override [run] output_dir")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.mode is not None and cfg.mode != args.command:
            raise ConfigError(
                f"config declares mode={cfg.mode!r} but was launched as {args.command!r}"
            )
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        if args.seed is not None:
            cfg.seed = args.seed
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
