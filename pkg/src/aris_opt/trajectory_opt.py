"""Convex trajectory subproblems for the alternating optimization.

For fixed schedule and phases, the way-point update maximizes the minimum
per-node average of an affine surrogate rate. The surrogate comes from three
ingredients, all expanded at the previous iterate:

* the slack rewrite of the expected rate (x, y, z slacks, see rate.py) with
  frozen direction coefficients xi,
* the first-order Taylor lower bound of that rate in the slacks,
* affine treatment of the elevation angles: the LoS angle psi is capped by
  the tangent of arctan(h/r) in the horizontal range (a global under-
  estimator, since arctan(h/r) is convex in r), while the NLoS angle phi is
  floored by the first-order expansion of the same map.

The phi floor (and in the vertical problem the psi cap, whose tangent in h
over-estimates the concave arctan branch) is not a safe one-sided surrogate,
so every accepted step is re-checked against the true objective by the
caller, with a shrinking trust region on rejection; see sca_step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import cvxpy as cp
import numpy as np

from .channel import compute_channel_grid
from .rate import PhasePlan, SlackState, slack_rate_taylor, xi_grid
from .scenario import Scenario, Trajectory, validate_trajectory

RANGE_EPSILON_M = 1e-3  # regularization when a way-point sits on a node
DEG = 180.0 / math.pi
_SOLVERS = ("CLARABEL", "SCS")


@dataclass
class LinearizationContext:
    """Everything frozen at the expansion trajectory for one subproblem build."""

    trajectory: Trajectory
    xi: np.ndarray  # (N, 2, 4)
    slacks: SlackState  # equality-initialized at the expansion point
    r_prev: np.ndarray  # (N, 2) horizontal ranges, regularized away from 0
    unit_prev: np.ndarray  # (N, 2, 2) unit vectors from node toward way-point
    f_rad: np.ndarray  # (N, 2) arctan(h/r) at the expansion point
    g_slope: np.ndarray  # (N, 2) |d/dr arctan(h/r)| at the expansion point


@dataclass
class SubproblemSolution:
    trajectory: Trajectory
    slacks: SlackState
    eta: float  # surrogate objective value
    status: str
    moved: bool


def init_slacks(traj: Trajectory, scenario: Scenario) -> SlackState:
    """Slacks holding their defining constraints with equality.

    psi and phi are the true elevation angles; x and z are the reciprocal
    LoS/NLoS probabilities expressed through them; y is the squared distance.
    """
    env = scenario.env
    w = scenario.node_positions()
    q, h = traj.horizontal, traj.vertical
    rho = np.linalg.norm(q[:, None, :] - w[None, :, :], axis=2)
    psi = np.degrees(np.arctan2(h[:, None], rho))
    x = 1.0 + env.a * np.exp(-env.b * (psi - env.a))
    y = rho**2 + h[:, None] ** 2
    z = 1.0 + (1.0 / env.a) * np.exp(env.b * (psi - env.a))
    return SlackState(x=x, y=y, z=z, psi=psi.copy(), phi=psi.copy())


def linearize_elevation_upper(q_prev, h: float, w):
    """Tangent data for the elevation angle as a function of horizontal range.

    Returns (f_rad, g_slope, r_prev) such that
    psi_deg(r) <= (180/pi) * (f_rad - g_slope * (r - r_prev)) for all r > 0,
    with equality at r = r_prev. A way-point exactly above the node is
    nudged to a 1 mm range so the slope stays finite.
    """
    r_prev = float(np.linalg.norm(np.asarray(q_prev, dtype=float) - np.asarray(w, dtype=float)))
    r_prev = max(r_prev, RANGE_EPSILON_M)
    f_rad = math.atan(h / r_prev)
    g_slope = h / (r_prev**2 + h**2)
    return f_rad, g_slope, r_prev


def build_context(
    scenario: Scenario, traj: Trajectory, phases: PhasePlan, fading: np.ndarray
) -> LinearizationContext:
    """Freeze directions, slacks, and angle linearizations at the iterate."""
    grid = compute_channel_grid(scenario, traj, fading)
    powers = np.array([n.transmit_power for n in scenario.nodes])
    xi = xi_grid(grid, phases, powers, scenario.env.beta0, scenario.env.noise_power)
    slacks = init_slacks(traj, scenario)
    w = scenario.node_positions()
    delta = traj.horizontal[:, None, :] - w[None, :, :]
    r = np.linalg.norm(delta, axis=2)
    r_prev = np.maximum(r, RANGE_EPSILON_M)
    unit = delta / r_prev[:, :, None]
    h = traj.vertical[:, None]
    f_rad = np.arctan2(h, r_prev)
    g_slope = h / (r_prev**2 + h**2)
    return LinearizationContext(
        trajectory=traj,
        xi=xi,
        slacks=slacks,
        r_prev=r_prev,
        unit_prev=unit,
        f_rad=f_rad,
        g_slope=g_slope,
    )


def _objective_coefficients(ctx: LinearizationContext, alpha: np.ndarray, alpha_los, alpha_nlos):
    """Per-node affine data of the averaged Taylor rate floor.

    Returns (const (2,), cx, cy, cz each (N, 2)): node k's floor expression is
    const[k] + sum(cx[...,k] * x) + sum(cy[...,k] * y) + sum(cz[...,k] * z)
    where the (N, 2) coefficient arrays are indexed by the slack's own node.
    """
    s0 = ctx.slacks
    n = alpha.shape[0]
    const = np.zeros(2)
    cx = np.zeros((2, n, 2))
    cy = np.zeros((2, n, 2))
    cz = np.zeros((2, n, 2))
    for k in (0, 1):
        kb = 1 - k
        val, dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb = slack_rate_taylor(
            s0.x[:, k], s0.x[:, kb], s0.y[:, k], s0.y[:, kb], s0.z[:, k], s0.z[:, kb],
            ctx.xi[:, k, :], alpha_los, alpha_nlos,
        )
        wgt = alpha[:, k] / n
        const[k] = np.sum(wgt * (
            val
            - dx_k * s0.x[:, k] - dx_kb * s0.x[:, kb]
            - dy_k * s0.y[:, k] - dy_kb * s0.y[:, kb]
            - dz_k * s0.z[:, k] - dz_kb * s0.z[:, kb]
        ))
        cx[k, :, k] += wgt * dx_k
        cx[k, :, kb] += wgt * dx_kb
        cy[k, :, k] += wgt * dy_k
        cy[k, :, kb] += wgt * dy_kb
        cz[k, :, k] += wgt * dz_k
        cz[k, :, kb] += wgt * dz_kb
    return const, cx, cy, cz


class _TrajectoryProgram:
    """Parameterized convex program reused across SCA iterations.

    mode 'horizontal' optimizes the way-points with altitudes fixed;
    mode 'vertical' optimizes altitudes with way-points fixed. With
    los_forced (deterministic-LoS design model) the probability slacks
    and angle variables drop out entirely.
    """

    def __init__(
        self,
        scenario: Scenario,
        mode: str,
        los_forced: bool = False,
        pinned: dict | None = None,
    ):
        if mode not in ("horizontal", "vertical"):
            raise ValueError(f"unknown mode {mode!r}")
        self.scenario = scenario
        self.mode = mode
        self.los_forced = los_forced
        self.pinned = dict(pinned or {})
        env = scenario.env
        lim = scenario.limits
        n = scenario.n_slots
        self.n = n
        # squared distances span ~1e4..1e6 m^2; solving in units of h_min^2
        # keeps the objective-row coefficients within a few decades
        self.yscale = lim.h_min**2

        self.y = cp.Variable((n, 2), name="y")
        self.eta = cp.Variable(name="eta")
        self.obj_const = cp.Parameter(2)
        self.cy = [cp.Parameter((n, 2)) for _ in range(2)]
        self.trust = cp.Parameter(nonneg=True)
        cons = []

        if not los_forced:
            self.x = cp.Variable((n, 2), name="x")
            self.z = cp.Variable((n, 2), name="z")
            self.psi = cp.Variable((n, 2), name="psi")
            self.phi = cp.Variable((n, 2), name="phi")
            self.cx = [cp.Parameter((n, 2)) for _ in range(2)]
            self.cz = [cp.Parameter((n, 2)) for _ in range(2)]
            cons += [
                self.x >= 1.0 + env.a * cp.exp(-env.b * (self.psi - env.a)),
                self.z >= 1.0 + (1.0 / env.a) * cp.exp(env.b * (self.phi - env.a)),
                self.psi <= 90.0,
            ]

        if mode == "horizontal":
            self.q = cp.Variable((n, 2), name="q")
            self.h_sq = cp.Parameter(n, nonneg=True)
            self.q_prev = cp.Parameter((n, 2))
            cons += [
                self.q[0] == lim.start,
                cp.norm(self.q[1:] - self.q[:-1], axis=1) <= lim.max_horizontal_step,
                cp.norm(lim.finish - self.q[n - 1]) <= lim.max_horizontal_step,
                cp.norm(self.q - self.q_prev, axis=1) <= self.trust,
            ]
            cons += [self.q[i] == np.asarray(val, dtype=float) for i, val in self.pinned.items()]
            w = scenario.node_positions()
            if not los_forced:
                # psi cap: tangent of arctan(h/r) in the range r (under-estimator)
                self.gdeg = [cp.Parameter(n, nonneg=True) for _ in range(2)]
                self.psi_rhs = [cp.Parameter(n) for _ in range(2)]
                # phi floor: full first-order expansion in q
                self.phi_const = [cp.Parameter(n) for _ in range(2)]
                self.phi_lin = [cp.Parameter((n, 2)) for _ in range(2)]
            for k in (0, 1):
                ranges = cp.norm(self.q - w[k][None, :], axis=1)
                cons.append(
                    self.y[:, k]
                    >= (cp.sum(cp.square(self.q - w[k][None, :]), axis=1) + self.h_sq) / self.yscale
                )
                if not los_forced:
                    cons.append(self.psi[:, k] + cp.multiply(self.gdeg[k], ranges) <= self.psi_rhs[k])
                    cons.append(
                        self.phi[:, k] >= self.phi_const[k] - cp.sum(cp.multiply(self.phi_lin[k], self.q), axis=1)
                    )
        else:
            self.h = cp.Variable(n, name="h")
            self.rho_sq = cp.Parameter((n, 2), nonneg=True)
            self.h_prev = cp.Parameter(n)
            cons += [
                cp.abs(self.h[1:] - self.h[:-1]) <= lim.max_vertical_step,
                self.h >= lim.h_min,
                self.h <= lim.h_max,
                cp.abs(self.h - self.h_prev) <= self.trust,
            ]
            cons += [self.h[i] == float(val) for i, val in self.pinned.items()]
            if not los_forced:
                # both angles ride the same tangent of arctan(h/r) in h
                self.t_const = [cp.Parameter(n) for _ in range(2)]
                self.t_slope = [cp.Parameter(n, nonneg=True) for _ in range(2)]
            for k in (0, 1):
                cons.append(self.y[:, k] >= (self.rho_sq[:, k] + cp.square(self.h)) / self.yscale)
                if not los_forced:
                    line = self.t_const[k] + cp.multiply(self.t_slope[k], self.h)
                    cons.append(self.psi[:, k] <= line)
                    cons.append(self.phi[:, k] >= line)

        for k in (0, 1):
            floor = self.obj_const[k] + cp.sum(cp.multiply(self.cy[k], self.y))
            if not los_forced:
                floor = floor + cp.sum(cp.multiply(self.cx[k], self.x)) + cp.sum(cp.multiply(self.cz[k], self.z))
            cons.append(floor >= self.eta)

        self.problem = cp.Problem(cp.Maximize(self.eta), cons)

    def set_point(self, ctx: LinearizationContext, alpha: np.ndarray, trust: float | None = None):
        env = self.scenario.env
        const, cx, cy, cz = _objective_coefficients(ctx, alpha, env.alpha_los, env.alpha_nlos)
        self.obj_const.value = const
        for k in (0, 1):
            self.cy[k].value = cy[k] * self.yscale  # chain rule for the rescaled y
            if not self.los_forced:
                self.cx[k].value = cx[k]
                self.cz[k].value = cz[k]
        lim = self.scenario.limits
        if self.mode == "horizontal":
            self.h_sq.value = ctx.trajectory.vertical**2
            self.q_prev.value = ctx.trajectory.horizontal
            self.trust.value = trust if trust is not None else 4 * self.n * lim.max_horizontal_step
            if not self.los_forced:
                for k in (0, 1):
                    g = DEG * ctx.g_slope[:, k]
                    self.gdeg[k].value = g
                    self.psi_rhs[k].value = DEG * ctx.f_rad[:, k] + g * ctx.r_prev[:, k]
                    lin = g[:, None] * ctx.unit_prev[:, k, :]
                    self.phi_lin[k].value = lin
                    self.phi_const[k].value = DEG * ctx.f_rad[:, k] + np.sum(lin * ctx.trajectory.horizontal, axis=1)
        else:
            w = self.scenario.node_positions()
            rho = np.linalg.norm(ctx.trajectory.horizontal[:, None, :] - w[None, :, :], axis=2)
            self.rho_sq.value = rho**2
            self.h_prev.value = ctx.trajectory.vertical
            self.trust.value = trust if trust is not None else lim.h_max - lim.h_min
            if not self.los_forced:
                h0 = ctx.trajectory.vertical
                for k in (0, 1):
                    r = ctx.r_prev[:, k]
                    slope = DEG * r / (r**2 + h0**2)
                    self.t_slope[k].value = slope
                    self.t_const[k].value = DEG * np.arctan2(h0, r) - slope * h0
        self._ctx = ctx

    # Clarabel's default static regularization (1e-8) stalls on the mixed
    # exponential/second-order cone geometry of these programs; the tight
    # setting reaches toy-instance precision but gives up on long horizons,
    # so larger problems start one rung down. Inaccurate statuses are fine:
    # every step is re-checked against the true objective by the caller.
    _TIGHT = {
        "max_iter": 500, "static_regularization_constant": 1e-10,
        "tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-9,
    }
    _MEDIUM = {
        "max_iter": 500, "static_regularization_constant": 1e-11,
        "tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-9,
    }
    _SCS_OPTS = {"eps": 1e-6, "max_iters": 25_000}

    def _solver_ladder(self):
        ladder = [("CLARABEL", self._TIGHT), ("CLARABEL", self._MEDIUM)]
        if self.n > 10:
            ladder = ladder[1:] + ladder[:1]
        return ladder + [("SCS", self._SCS_OPTS)]

    def solve(self) -> SubproblemSolution:
        ctx = self._ctx
        status = None
        for name, options in self._solver_ladder():
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)
                    self.problem.solve(solver=name, **options)
            except cp.error.SolverError:
                status = f"{name} raised"
                continue
            if self.problem.status in ("optimal", "optimal_inaccurate"):
                return self._extract(f"{name}:{self.problem.status}")
            status = f"{name}:{self.problem.status}"
        warnings.warn(f"trajectory subproblem not solved ({status}); keeping the iterate")
        return SubproblemSolution(
            trajectory=ctx.trajectory, slacks=ctx.slacks.copy(), eta=-np.inf,
            status=str(status), moved=False,
        )

    def _extract(self, status: str) -> SubproblemSolution:
        ctx = self._ctx
        if self.mode == "horizontal":
            q = _project_feasible_horizontal(
                np.asarray(self.q.value), ctx.trajectory.horizontal, self.scenario
            )
            traj = Trajectory(horizontal=q, vertical=ctx.trajectory.vertical.copy())
        else:
            h = _project_feasible_vertical(
                np.asarray(self.h.value), ctx.trajectory.vertical, self.scenario
            )
            traj = Trajectory(horizontal=ctx.trajectory.horizontal.copy(), vertical=h)
        y_val = np.asarray(self.y.value) * self.yscale
        if self.los_forced:
            n = self.n
            ones = np.ones((n, 2))
            slacks = SlackState(x=ones.copy(), y=y_val, z=ones.copy(),
                                psi=90.0 * ones.copy(), phi=90.0 * ones.copy())
        else:
            slacks = SlackState(
                x=np.asarray(self.x.value), y=y_val, z=np.asarray(self.z.value),
                psi=np.asarray(self.psi.value), phi=np.asarray(self.phi.value),
            )
        moved = bool(
            np.max(np.abs(traj.horizontal - ctx.trajectory.horizontal)) > 1e-9
            or np.max(np.abs(traj.vertical - ctx.trajectory.vertical)) > 1e-9
        )
        return SubproblemSolution(
            trajectory=traj, slacks=slacks, eta=float(self.eta.value), status=status, moved=moved
        )


def _project_feasible_horizontal(q: np.ndarray, q_ref: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Snap solver output onto the mobility constraints.

    Solver tolerances can leave steps a hair over the cap; blending toward
    the (feasible) expansion point fixes that with negligible movement.
    """
    lim = scenario.limits
    q = q.copy()
    q[0] = lim.start

    def feasible(mat, slack=1e-12):
        steps = np.linalg.norm(np.diff(mat, axis=0), axis=1)
        if steps.size and steps.max() > lim.max_horizontal_step + slack:
            return False
        return np.linalg.norm(lim.finish - mat[-1]) <= lim.max_horizontal_step + slack

    return _blend_until_feasible(q, q_ref, feasible)


def _project_feasible_vertical(h: np.ndarray, h_ref: np.ndarray, scenario: Scenario) -> np.ndarray:
    lim = scenario.limits
    h = np.clip(h, lim.h_min, lim.h_max)

    def feasible(vec, slack=1e-12):
        steps = np.abs(np.diff(vec))
        return not (steps.size and steps.max() > lim.max_vertical_step + slack)

    return _blend_until_feasible(h, np.clip(h_ref, lim.h_min, lim.h_max), feasible)


def _blend_until_feasible(value, reference, feasible: Callable, iters: int = 60):
    if feasible(value):
        return value
    lo, hi = 0.0, 1.0  # hi = fully at the feasible reference
    for _ in range(iters):
        mid = (lo + hi) / 2
        if feasible((1 - mid) * value + mid * reference):
            hi = mid
        else:
            lo = mid
    return (1 - hi) * value + hi * reference


def build_horizontal_subproblem(
    ctx: LinearizationContext, alpha: np.ndarray, scenario: Scenario,
    los_forced: bool = False, trust: float | None = None, pinned: dict | None = None,
) -> _TrajectoryProgram:
    """One-shot construction of the way-point update program at ctx."""
    program = _TrajectoryProgram(scenario, "horizontal", los_forced, pinned)
    program.set_point(ctx, alpha, trust)
    return program


def build_vertical_subproblem(
    ctx: LinearizationContext, alpha: np.ndarray, scenario: Scenario,
    los_forced: bool = False, trust: float | None = None, pinned: dict | None = None,
) -> _TrajectoryProgram:
    """One-shot construction of the altitude update program at ctx."""
    program = _TrajectoryProgram(scenario, "vertical", los_forced, pinned)
    program.set_point(ctx, alpha, trust)
    return program


def solve_subproblem(program: _TrajectoryProgram) -> SubproblemSolution:
    """Solve a built subproblem; falls back to the expansion point on failure."""
    solution = program.solve()
    validate_trajectory(solution.trajectory, program.scenario, tol=1e-6)
    return solution


def sca_step(
    program: _TrajectoryProgram,
    ctx: LinearizationContext,
    alpha: np.ndarray,
    metric: Callable[[Trajectory], float],
    max_halvings: int = 6,
) -> tuple[Trajectory, float, bool]:
    """One safeguarded surrogate step.

    Solves the subproblem, accepts the move only if the caller's true
    objective does not decrease, and otherwise retries with the trust
    region halved. Returns (trajectory, metric value, accepted flag).
    """
    base = metric(ctx.trajectory)
    lim = program.scenario.limits
    trust = None
    for attempt in range(max_halvings + 1):
        program.set_point(ctx, alpha, trust)
        solution = program.solve()
        if solution.moved:
            candidate = metric(solution.trajectory)
            if candidate >= base - 1e-12:
                return solution.trajectory, candidate, True
        full = (
            lim.max_horizontal_step if program.mode == "horizontal" else lim.max_vertical_step
        )
        trust = full / (2.0 ** (attempt + 1))
        if trust < 1e-6:
            break
    return ctx.trajectory, base, False
