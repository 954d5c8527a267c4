"""Max-min slot scheduling: relaxed LP and binary reconstruction.

Per slot at most one node may receive. The relaxed problem maximizes the
minimum over the two nodes of their time-averaged scheduled rate with slot
shares in [0, 1]; an exact LP solves it. Binary reconstruction enumerates
all assignments when the horizon is short enough and otherwise rounds
greedily (largest rate gap first, assign to whichever node lifts the running
minimum most) followed by reassignment/swap polish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import BackendError


@dataclass(frozen=True)
class Schedule:
    """Slot shares (N, 2) and the achieved minimum average rate."""

    alpha: np.ndarray
    eta: float
    kappa: float | None = None  # rounding loss relative to the relaxed optimum

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "alpha", a)
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValueError(f"alpha must be (n_slots, 2), got {a.shape}")
        if a.min() < -1e-9 or a.max() > 1 + 1e-9:
            raise ValueError("slot shares must lie in [0, 1]")
        if (a.sum(axis=1) > 1 + 1e-9).any():
            raise ValueError("per-slot shares must sum to at most 1")

    @property
    def n_slots(self) -> int:
        return self.alpha.shape[0]

    def is_binary(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.minimum(self.alpha, 1 - self.alpha) <= tol))


def min_average_rate(alpha: np.ndarray, rates: np.ndarray) -> float:
    """The max-min objective: worse of the two per-node average scheduled rates."""
    n = rates.shape[0]
    return float(np.min(np.sum(alpha * rates, axis=0)) / n)


def solve_schedule_lp(rates: np.ndarray) -> Schedule:
    """Exact solution of the relaxed scheduling problem.

    Variables are the 2N shares plus the common rate floor eta; constraints
    are the two per-node average-rate floors and the per-slot share budget.
    """
    rates = np.asarray(rates, dtype=float)
    n = rates.shape[0]
    if rates.min() < 0:
        raise ValueError("rates must be nonnegative")
    if not rates.any():
        return Schedule(alpha=np.zeros((n, 2)), eta=0.0)
    # x = [alpha[0,0], alpha[0,1], ..., alpha[n-1,1], eta], maximize eta
    cost = np.zeros(2 * n + 1)
    cost[-1] = -1.0
    a_ub = np.zeros((2 + n, 2 * n + 1))
    b_ub = np.zeros(2 + n)
    for k in (0, 1):
        a_ub[k, k : 2 * n : 2] = -rates[:, k] / n
        a_ub[k, -1] = 1.0
    for slot in range(n):
        a_ub[2 + slot, 2 * slot : 2 * slot + 2] = 1.0
        b_ub[2 + slot] = 1.0
    bounds = [(0.0, 1.0)] * (2 * n) + [(0.0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise BackendError(f"scheduling LP failed: {res.message}")
    alpha = np.clip(res.x[:-1].reshape(n, 2), 0.0, 1.0)
    # clip any solver fuzz on the per-slot budget before constructing
    over = alpha.sum(axis=1)
    bad = over > 1.0
    if bad.any():
        alpha[bad] /= over[bad, None]
    return Schedule(alpha=alpha, eta=float(res.x[-1]))


def _greedy_binary(rates: np.ndarray) -> np.ndarray:
    """Assign every slot to one node, most decisive slots first."""
    n = rates.shape[0]
    alpha = np.zeros((n, 2))
    totals = np.zeros(2)
    order = np.argsort(-np.abs(rates[:, 0] - rates[:, 1]), kind="stable")
    for slot in order:
        gains = [np.minimum(totals[0] + rates[slot, 0], totals[1]),
                 np.minimum(totals[0], totals[1] + rates[slot, 1])]
        pick = 0 if gains[0] >= gains[1] else 1
        alpha[slot, pick] = 1.0
        totals[pick] += rates[slot, pick]
    return alpha


def _polish_binary(alpha: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Reassignment and pairwise-swap passes until neither raises the minimum."""
    alpha = alpha.copy()
    n = alpha.shape[0]
    totals = np.sum(alpha * rates, axis=0)
    improved = True
    while improved:
        improved = False
        for slot in range(n):
            current = int(np.argmax(alpha[slot])) if alpha[slot].any() else -1
            for target in (0, 1):
                if target == current:
                    continue
                new_totals = totals.copy()
                if current >= 0:
                    new_totals[current] -= alpha[slot, current] * rates[slot, current]
                new_totals[target] += rates[slot, target]
                if new_totals.min() > totals.min() + 1e-12:
                    alpha[slot] = 0.0
                    alpha[slot, target] = 1.0
                    totals = new_totals
                    improved = True
        for s1 in range(n):
            c1 = int(np.argmax(alpha[s1])) if alpha[s1].any() else -1
            if c1 < 0:
                continue
            for s2 in range(s1 + 1, n):
                c2 = int(np.argmax(alpha[s2])) if alpha[s2].any() else -1
                if c2 < 0 or c1 == c2:
                    continue
                new_totals = totals.copy()
                new_totals[c1] += rates[s2, c1] - rates[s1, c1]
                new_totals[c2] += rates[s1, c2] - rates[s2, c2]
                if new_totals.min() > totals.min() + 1e-12:
                    alpha[s1], alpha[s2] = 0.0, 0.0
                    alpha[s1, c2] = 1.0
                    alpha[s2, c1] = 1.0
                    totals = new_totals
                    improved = True
                    c1 = c2
    return alpha


_EXACT_LIMIT = 16  # 2^16 assignments enumerate in milliseconds


def _exact_binary(rates: np.ndarray) -> np.ndarray:
    """Exhaustive optimum over per-slot receiver choices (idling never helps)."""
    n = rates.shape[0]
    masks = np.arange(1 << n, dtype=np.uint32)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1  # 1 -> node 1
    s1 = bits @ rates[:, 0]
    s2 = (1 - bits) @ rates[:, 1]
    best = int(np.argmax(np.minimum(s1, s2)))
    alpha = np.zeros((n, 2))
    chosen = bits[best]
    alpha[chosen == 1, 0] = 1.0
    alpha[chosen == 0, 1] = 1.0
    return alpha


def reconstruct_binary(schedule: Schedule, rates: np.ndarray) -> Schedule:
    """Round a relaxed schedule to a binary one, reporting the loss kappa.

    Already-binary inputs pass through unchanged. The result keeps the
    one-receiver-per-slot budget and its minimum average rate is
    (1 - kappa) times the relaxed optimum.
    """
    rates = np.asarray(rates, dtype=float)
    eta_relaxed = schedule.eta
    if schedule.is_binary():
        alpha = schedule.alpha.copy()
    elif rates.shape[0] <= _EXACT_LIMIT:
        alpha = _exact_binary(rates)
    else:
        alpha = _polish_binary(_greedy_binary(rates), rates)
    eta = min_average_rate(alpha, rates)
    kappa = 0.0 if eta_relaxed <= 0 else max(0.0, 1.0 - eta / eta_relaxed)
    return Schedule(alpha=alpha, eta=eta, kappa=kappa)
