"""Alternating optimization over scheduling, phases, and the 3D trajectory.

Each outer iteration runs: scheduling LP -> per-slot phase ascent ->
horizontal way-point step -> altitude step, every stage guarded so the
objective of the scheme's design model never decreases. Three schemes:

* plc    joint 3D design under the probabilistic LoS model,
* plcfa  same model, altitude frozen at the initial cruise level,
* dlc    3D design assuming every link is LoS (idealized model).

Whatever the internal model, reported comparisons always re-evaluate the
result under the probabilistic model.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scen
from .channel import compute_channel_grid, scenario_fading
from .rate import PhasePlan, SlackState, expected_rates_matrix, identity_phases
from .phase_opt import coordinate_ascent_phases, slot_phase_inputs
from .scheduling import Schedule, min_average_rate, reconstruct_binary, solve_schedule_lp
from .scenario import Scenario, Trajectory, initial_trajectory
from .trajectory_opt import _TrajectoryProgram, build_context, init_slacks, sca_step

SCHEMES = ("plc", "plcfa", "dlc")


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "plc"
    epsilon: float = 1e-3
    max_iterations: int = 50
    phase_sweeps: int = 3

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")

    @property
    def los_forced(self) -> bool:
        return self.scheme == "dlc"

    @property
    def fixed_altitude(self) -> bool:
        return self.scheme == "plcfa"


@dataclass
class AoState:
    """Mutable state of one alternating-optimization run."""

    scenario: Scenario
    config: SchemeConfig
    fading: np.ndarray
    trajectory: Trajectory
    phases: PhasePlan
    schedule: Schedule
    slacks: SlackState
    eta_history: list[float] = field(default_factory=list)
    iteration: int = 0
    converged: bool = False
    eta_plc: float = 0.0  # final value under the probabilistic model
    binary_schedule: Schedule | None = None

    @property
    def eta(self) -> float:
        return self.eta_history[-1] if self.eta_history else 0.0


def evaluate_objective(
    traj: Trajectory,
    phases: PhasePlan,
    schedule: Schedule,
    scenario: Scenario,
    fading: np.ndarray,
) -> float:
    """Ground-truth max-min objective under the probabilistic LoS model.

    Rejects kinematically infeasible trajectories rather than clamping them.
    """
    from .scenario import validate_trajectory

    validate_trajectory(traj, scenario, tol=1e-6)
    rates = _rates(scenario, traj, phases, fading, los_forced=False)
    return min_average_rate(schedule.alpha, rates)


def _rates(scenario, traj, phases, fading, los_forced: bool) -> np.ndarray:
    grid = compute_channel_grid(scenario, traj, fading)
    powers = np.array([n.transmit_power for n in scenario.nodes])
    return expected_rates_matrix(grid, phases, powers, scenario.env.noise_power, los_forced)


def _phase_stage(state: AoState) -> None:
    """Coordinate-ascent update of each scheduled slot's reflection vector.

    A slot's update is kept only if the running max-min objective does not
    drop (with fractional schedules the other node's rate in that slot can
    move the other way).
    """
    s = state.scenario
    cfg = state.config
    grid = compute_channel_grid(s, state.trajectory, state.fading)
    powers = np.array([n.transmit_power for n in s.nodes])
    rates = expected_rates_matrix(grid, state.phases, powers, s.env.noise_power, cfg.los_forced)
    alpha = state.schedule.alpha
    totals = np.sum(alpha * rates, axis=0)
    v = state.phases.coefficients.copy()
    for n in range(s.n_slots):
        if alpha[n].max() <= 1e-12:
            continue
        receiver = int(np.argmax(alpha[n]))
        slot = grid.slot(n)
        gains, probs = slot_phase_inputs(slot, receiver, s.gamma(1 - receiver))
        if cfg.los_forced:
            probs = np.array([1.0, 0.0, 0.0, 0.0])
        cand, _ = coordinate_ascent_phases(v[n], gains, probs, max_sweeps=cfg.phase_sweeps)
        plan_row = PhasePlan(cand[None, :])
        new_rates_n = expected_rates_matrix(
            _single_slot_grid(grid, n), plan_row, powers, s.env.noise_power, cfg.los_forced
        )[0]
        new_totals = totals - alpha[n] * rates[n] + alpha[n] * new_rates_n
        if new_totals.min() >= totals.min() - 1e-12:
            v[n] = cand
            rates[n] = new_rates_n
            totals = new_totals
    state.phases = PhasePlan(v)


def _single_slot_grid(grid, n: int):
    return dataclasses.replace(
        grid,
        distance=grid.distance[n : n + 1],
        elevation_deg=grid.elevation_deg[n : n + 1],
        p_los=grid.p_los[n : n + 1],
        steering=grid.steering[n : n + 1],
        tau=grid.tau[n : n + 1],
        zeta=grid.zeta[n : n + 1],
    )


def alternating_optimize(scenario: Scenario, config: SchemeConfig) -> AoState:
    """Run the full alternating loop until the objective change is below epsilon."""
    fading = scenario_fading(scenario)
    traj = initial_trajectory(scenario)
    state = AoState(
        scenario=scenario,
        config=config,
        fading=fading,
        trajectory=traj,
        phases=identity_phases(scenario.n_slots, scenario.ris.n_elements),
        schedule=Schedule(alpha=np.zeros((scenario.n_slots, 2)), eta=0.0),
        slacks=init_slacks(traj, scenario),
    )
    los_forced = config.los_forced

    def internal_objective(trajectory: Trajectory) -> float:
        rates = _rates(scenario, trajectory, state.phases, fading, los_forced)
        return min_average_rate(state.schedule.alpha, rates)

    programs = {"horizontal": _TrajectoryProgram(scenario, "horizontal", los_forced)}
    if not config.fixed_altitude:
        programs["vertical"] = _TrajectoryProgram(scenario, "vertical", los_forced)

    for it in range(1, config.max_iterations + 1):
        state.iteration = it
        rates = _rates(scenario, state.trajectory, state.phases, fading, los_forced)
        state.schedule = solve_schedule_lp(rates)
        _phase_stage(state)
        for name, program in programs.items():
            ctx = build_context(scenario, state.trajectory, state.phases, fading)
            new_traj, _, _ = sca_step(program, ctx, state.schedule.alpha, internal_objective)
            state.trajectory = new_traj
        state.slacks = init_slacks(state.trajectory, scenario)
        eta = internal_objective(state.trajectory)
        previous = state.eta_history[-1] if state.eta_history else None
        state.eta_history.append(eta)
        if previous is not None and abs(eta - previous) < config.epsilon:
            state.converged = True
            break

    rates = _rates(scenario, state.trajectory, state.phases, fading, los_forced)
    state.binary_schedule = reconstruct_binary(state.schedule, rates)
    plc_rates = _rates(scenario, state.trajectory, state.phases, fading, los_forced=False)
    state.eta_plc = min_average_rate(state.binary_schedule.alpha, plc_rates)
    return state


def run_scheme_comparison(
    scenario: Scenario,
    schemes=SCHEMES,
    sweep: str | None = None,
    values=None,
    epsilon: float = 1e-3,
    max_iterations: int = 50,
    max_workers: int = 1,
):
    """Optimize every (scheme, sweep value) pair; all rows evaluated under PLC.

    sweep is None (single point), 'T' (horizon seconds, N = T / slot length)
    or 'M' (total RIS elements arranged as a near-square grid). Returns rows
    of (sweep_value, scheme, eta_bpshz) sorted by value then scheme order.
    """
    points = [None] if sweep is None else list(values)
    jobs = [(value, scheme) for value in points for scheme in schemes]

    def variant(value) -> Scenario:
        if sweep is None or value is None:
            return scenario
        if sweep == "T":
            return scen.with_slots(scenario, int(round(value / scenario.slot_seconds)))
        if sweep == "M":
            m = int(round(value))
            rows = int(np.floor(np.sqrt(m)))
            while m % rows:
                rows -= 1
            return scen.with_ris_elements(scenario, rows, m // rows)
        raise ValueError(f"sweep must be 'T' or 'M', got {sweep!r}")

    def run(job):
        value, scheme = job
        cfg = SchemeConfig(scheme=scheme, epsilon=epsilon, max_iterations=max_iterations)
        state = alternating_optimize(variant(value), cfg)
        return value, scheme, state.eta_plc

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    return results
