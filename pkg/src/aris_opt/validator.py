"""Independent checks: Monte-Carlo sampling, enumeration, and grid oracles.

Everything here validates the closed-form machinery through a different
code path than the one being checked: explicit state enumeration against
the expected-rate formula, Bernoulli sampling against the enumeration, a
ratio-threshold argument against the scheduling LP, and exhaustive grids
against the convex subproblems and the whole alternating loop.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import SlotChannel, compute_channel_grid, scenario_fading
from .errors import BudgetExceeded
from .rate import PhasePlan, expected_rates_matrix
from .scenario import Scenario, Trajectory

_TINY = 1e-300


@dataclass(frozen=True)
class McReport:
    n_samples: int
    empirical_mean: float
    closed_form: float
    std_error: float
    z_score: float


def enumeration_expected_rate(slot: SlotChannel, receiver: int, v: np.ndarray, gamma: float) -> float:
    """Expected rate by explicit enumeration of the four joint link states.

    Uses the full diagonal reflection matrix, deliberately not the
    elementwise product path, so the two implementations cross-check.
    """
    tx = 1 - receiver
    theta = np.diag(np.asarray(v))
    p = np.array([float(slot.p_los[receiver]), float(slot.p_los[tx])])
    total = 0.0
    for state_rx, chan_rx in ((0, slot.los[receiver]), (1, slot.nlos[receiver])):
        for state_tx, chan_tx in ((0, slot.los[tx]), (1, slot.nlos[tx])):
            weight = (p[0] if state_rx == 0 else 1 - p[0]) * (p[1] if state_tx == 0 else 1 - p[1])
            amp = chan_rx.conj() @ theta @ chan_tx
            total += weight * np.log2(1.0 + gamma * float(np.abs(amp) ** 2))
    return float(total)


def monte_carlo_expected_rate(
    slot: SlotChannel, receiver: int, v: np.ndarray, gamma: float, n_samples: int, seed
) -> McReport:
    """Sample the joint LoS states and compare against the closed form."""
    from .rate import expected_rate

    if n_samples < 1:
        raise ValueError("need at least one sample")
    terms = expected_rate(slot, receiver, v, gamma)
    rates = terms.rates()
    tx = 1 - receiver
    rng = np.random.default_rng(seed)
    los_rx = rng.random(n_samples) < slot.p_los[receiver]
    los_tx = rng.random(n_samples) < slot.p_los[tx]
    draw = rates[2 * (~los_rx).astype(int) + (~los_tx).astype(int)]
    mean = float(draw.mean())
    if n_samples == 1:
        warnings.warn("single-sample Monte-Carlo: standard error reported as 0")
        se = 0.0
    else:
        se = float(draw.std(ddof=1) / np.sqrt(n_samples))
        if se <= 1e-14 * max(1.0, abs(mean)):  # constant draws up to rounding
            se = 0.0
    if se == 0.0:
        z = 0.0 if abs(mean - terms.expected) <= 1e-12 * max(1.0, abs(mean)) else float("inf")
    else:
        z = (mean - terms.expected) / se
    return McReport(
        n_samples=n_samples, empirical_mean=mean, closed_form=terms.expected,
        std_error=se, z_score=float(z),
    )


# ---------------------------------------------------------------------------
# Scheduling oracles
# ---------------------------------------------------------------------------


def schedule_threshold_oracle(rates: np.ndarray) -> float:
    """Exact relaxed max-min optimum via the rate-ratio threshold structure.

    An optimal share split sends high r1/r2 slots to node 1, low to node 2,
    with at most one slot time-shared; sweeping the boundary and equalizing
    on it covers every such split.
    """
    rates = np.asarray(rates, dtype=float)
    n = rates.shape[0]
    r1, r2 = rates[:, 0], rates[:, 1]
    order = np.argsort(-np.arctan2(r1, r2), kind="stable")
    s1, s2 = r1[order], r2[order]
    prefix1 = np.concatenate([[0.0], np.cumsum(s1)])  # node-1 take of first j slots
    suffix2 = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]])  # node-2 take after j
    best = 0.0
    for j in range(n):
        a, b = prefix1[j], suffix2[j + 1]
        rj1, rj2 = s1[j], s2[j]
        if rj1 + rj2 > 0:
            s = np.clip((b + rj2 - a) / (rj1 + rj2), 0.0, 1.0)
        else:
            s = 0.0
        best = max(best, min(a + s * rj1, b + (1 - s) * rj2))
    return best / n


def best_binary_schedule(rates: np.ndarray) -> tuple[np.ndarray, float]:
    """Exhaustive search over per-slot {node 1, node 2, idle} assignments."""
    rates = np.asarray(rates, dtype=float)
    n = rates.shape[0]
    if 3**n > 10**7:
        raise BudgetExceeded(f"3^{n} binary schedules exceed the oracle cap")
    best_eta = -1.0
    best = None
    for code in range(3**n):
        totals = np.zeros(2)
        alpha = np.zeros((n, 2))
        c = code
        for slot in range(n):
            choice = c % 3
            c //= 3
            if choice < 2:
                alpha[slot, choice] = 1.0
                totals[choice] += rates[slot, choice]
        eta = totals.min() / n
        if eta > best_eta:
            best_eta, best = eta, alpha
    return best, float(best_eta)


# ---------------------------------------------------------------------------
# Grid oracles for the trajectory subproblems and the whole loop
# ---------------------------------------------------------------------------


def grid_search_waypoint(
    scenario: Scenario,
    traj: Trajectory,
    phases: PhasePlan,
    fading: np.ndarray,
    alpha: np.ndarray,
    slot: int,
    resolution: float = 0.25,
    los_forced: bool = False,
):
    """Exhaustively move one way-point on a grid; all other slots stay put.

    The candidate box is the mobility-feasible square around the slot's
    neighbors. Returns (best position, best objective).
    """
    lim = scenario.limits
    powers = np.array([node.transmit_power for node in scenario.nodes])
    q = traj.horizontal
    n = scenario.n_slots
    anchors = []
    if slot == 0:
        raise ValueError("slot 0 is pinned to the start position")
    anchors.append(q[slot - 1])
    if slot + 1 < n:
        anchors.append(q[slot + 1])
    else:
        anchors.append(lim.finish)
    anchors = np.asarray(anchors)
    lo = anchors.max(axis=0) - lim.max_horizontal_step
    hi = anchors.min(axis=0) + lim.max_horizontal_step
    xs = np.arange(lo[0], hi[0] + resolution / 2, resolution)
    ys = np.arange(lo[1], hi[1] + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    ok = np.ones(len(pts), dtype=bool)
    for anchor in anchors:
        ok &= np.linalg.norm(pts - anchor[None, :], axis=1) <= lim.max_horizontal_step + 1e-9
    pts = pts[ok]
    if len(pts) == 0:
        raise ValueError("empty candidate grid; check the step caps")

    base_rates = expected_rates_matrix(
        compute_channel_grid(scenario, traj, fading), phases, powers,
        scenario.env.noise_power, los_forced,
    )
    base_totals = np.sum(alpha * base_rates, axis=0) - alpha[slot] * base_rates[slot]

    fake = Trajectory(horizontal=pts, vertical=np.full(len(pts), traj.vertical[slot]))
    grid = compute_channel_grid(scenario, fake, fading)
    slot_plan = PhasePlan(np.repeat(phases.coefficients[slot][None, :], len(pts), axis=0))
    cand_rates = expected_rates_matrix(grid, slot_plan, powers, scenario.env.noise_power, los_forced)
    objective = np.min(base_totals[None, :] + alpha[slot][None, :] * cand_rates, axis=1) / n
    best = int(np.argmax(objective))
    return pts[best], float(objective[best])


def grid_search_altitude(
    scenario: Scenario,
    traj: Trajectory,
    phases: PhasePlan,
    fading: np.ndarray,
    alpha: np.ndarray,
    slot: int,
    resolution: float = 0.5,
    los_forced: bool = False,
):
    """Exhaustively move one slot's altitude; neighbors cap the range."""
    lim = scenario.limits
    powers = np.array([node.transmit_power for node in scenario.nodes])
    h = traj.vertical
    lo, hi = lim.h_min, lim.h_max
    if slot > 0:
        lo = max(lo, h[slot - 1] - lim.max_vertical_step)
        hi = min(hi, h[slot - 1] + lim.max_vertical_step)
    if slot + 1 < scenario.n_slots:
        lo = max(lo, h[slot + 1] - lim.max_vertical_step)
        hi = min(hi, h[slot + 1] + lim.max_vertical_step)
    levels = np.arange(lo, hi + resolution / 2, resolution)

    base_rates = expected_rates_matrix(
        compute_channel_grid(scenario, traj, fading), phases, powers,
        scenario.env.noise_power, los_forced,
    )
    base_totals = np.sum(alpha * base_rates, axis=0) - alpha[slot] * base_rates[slot]
    fake = Trajectory(
        horizontal=np.repeat(traj.horizontal[slot][None, :], len(levels), axis=0),
        vertical=levels,
    )
    grid = compute_channel_grid(scenario, fake, fading)
    slot_plan = PhasePlan(np.repeat(phases.coefficients[slot][None, :], len(levels), axis=0))
    cand_rates = expected_rates_matrix(grid, slot_plan, powers, scenario.env.noise_power, los_forced)
    objective = np.min(base_totals[None, :] + alpha[slot][None, :] * cand_rates, axis=1) / scenario.n_slots
    best = int(np.argmax(objective))
    return float(levels[best]), float(objective[best])


def toy_end_to_end_oracle(
    scenario: Scenario,
    waypoint_resolution: float = 1.0,
    altitude_resolution: float = 1.0,
    budget: int = 10**7,
    fading: np.ndarray | None = None,
):
    """Global grid optimum of the joint problem on a two-slot toy instance.

    Requires: exactly 2 slots, a single-element RIS (phase then cancels),
    and a negligible vertical step cap so the altitude profile is flat.
    Grids the free second way-point over the mobility region and the shared
    altitude over its box, picking per point the best of the nine binary
    schedules. Returns (eta, best waypoint, best altitude).
    """
    lim = scenario.limits
    if scenario.n_slots != 2:
        raise ValueError("the end-to-end oracle covers two-slot toys")
    if scenario.ris.n_elements != 1:
        raise ValueError("the end-to-end oracle requires a single-element RIS")
    if lim.max_vertical_step > altitude_resolution / 10:
        raise ValueError("altitude profile must be effectively flat for the oracle")
    if fading is None:
        fading = scenario_fading(scenario)
    powers = np.array([node.transmit_power for node in scenario.nodes])

    step = lim.max_horizontal_step
    lo = np.maximum(lim.start, lim.finish) - step
    hi = np.minimum(lim.start, lim.finish) + step
    xs = np.arange(lo[0], hi[0] + waypoint_resolution / 2, waypoint_resolution)
    ys = np.arange(lo[1], hi[1] + waypoint_resolution / 2, waypoint_resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    ok = (np.linalg.norm(pts - lim.start[None, :], axis=1) <= step + 1e-9) & (
        np.linalg.norm(pts - lim.finish[None, :], axis=1) <= step + 1e-9
    )
    pts = pts[ok]
    hs = np.arange(lim.h_min, lim.h_max + altitude_resolution / 2, altitude_resolution)
    if len(pts) * len(hs) > budget:
        raise BudgetExceeded(f"{len(pts)} way-points x {len(hs)} altitudes exceed the cap")

    ones = PhasePlan(np.ones((len(hs), 1), dtype=complex))
    start_traj = Trajectory(horizontal=np.repeat(lim.start[None, :], len(hs), axis=0), vertical=hs)
    rates_start = expected_rates_matrix(
        compute_channel_grid(scenario, start_traj, fading), ones, powers, scenario.env.noise_power
    )  # (H, 2): slot-0 rates per altitude

    best = (-1.0, None, None)
    ones_p = PhasePlan(np.ones((len(pts), 1), dtype=complex))
    for hi_idx, h in enumerate(hs):
        free_traj = Trajectory(horizontal=pts, vertical=np.full(len(pts), h))
        rates_free = expected_rates_matrix(
            compute_channel_grid(scenario, free_traj, fading), ones_p, powers, scenario.env.noise_power
        )  # (P, 2)
        r0 = rates_start[hi_idx]  # (2,)
        # nine binary schedules for two slots; idle encoded as -1
        eta_best = np.full(len(pts), -1.0)
        for c0 in (-1, 0, 1):
            for c1 in (-1, 0, 1):
                totals = np.zeros((len(pts), 2))
                if c0 >= 0:
                    totals[:, c0] += r0[c0]
                if c1 >= 0:
                    totals[:, c1] += rates_free[:, c1]
                eta_best = np.maximum(eta_best, totals.min(axis=1) / 2.0)
        top = int(np.argmax(eta_best))
        if eta_best[top] > best[0]:
            best = (float(eta_best[top]), pts[top].copy(), float(h))
    return best
