"""Time-stepping driver shared by the command line and the sweep machinery."""

from __future__ import annotations

from dataclasses import dataclass, field

from .calculus import ModelParams
from .diagnostics import DiagnosticsRecord, record
from .errors import InvalidParameterError
from .fokker_planck import envelope_check
from .galerkin import SimState, coupled_step, make_initial_state
from .spectral import GaussianFrame, ScalarField, VectorField

__all__ = ["SimulationResult", "simulate"]


@dataclass
class SimulationResult:
    records: list[DiagnosticsRecord]
    final_state: SimState
    envelope_ok: bool
    states: list[SimState] = field(default_factory=list)


def simulate(frame: GaussianFrame, params: ModelParams, q0: ScalarField,
             u0: VectorField, dt: float, t_final: float, record_every: int = 1,
             keep_states: bool = False, picard_tol: float = 1e-10,
             max_sweeps: int = 25) -> SimulationResult:
    """March the coupled system to t_final, recording diagnostics on a cadence.

    Solver failures (positivity breach, fixed-point stall) propagate to the
    caller; an envelope violation only clears ``envelope_ok``.
    """
    if dt <= 0.0 or t_final <= 0.0:
        raise InvalidParameterError("dt and t_final must be positive")
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * t_final:
        raise InvalidParameterError(f"t_final={t_final} is not a multiple of dt={dt}")

    state = make_initial_state(q0, u0)
    records = [record(state, params)]
    states = [state] if keep_states else []
    envelope_ok = envelope_check(state.q, state.env)
    for step in range(n_steps):
        state = coupled_step(state, params, dt, picard_tol=picard_tol,
                             max_sweeps=max_sweeps)
        if (step + 1) % record_every == 0 or step + 1 == n_steps:
            records.append(record(state, params))
            envelope_ok = envelope_ok and envelope_check(state.q, state.env)
            if keep_states:
                states.append(state)
    return SimulationResult(records=records, final_state=state,
                            envelope_ok=envelope_ok, states=states)
