"""Per-slot RIS phase design.

For a fixed schedule and trajectory the slots decouple, so each slot's
reflection vector maximizes that slot's expected rate on its own. The
expected rate is a probability-weighted sum of log terms in the quadratic
forms v^H G v, one PSD matrix G per joint LoS/NLoS state (transmit SNR
already folded in). Solvers provided, in decreasing tightness of guarantee:

* semidefinite relaxation over V = v v^H (upper bound certificate),
* Gaussian randomization recovery from the relaxed matrix,
* element-wise coordinate ascent (production path),
* exhaustive phase-grid search (oracle, budget-capped).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .channel import SlotChannel
from .errors import BackendError, BudgetExceeded

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LiftedPhase:
    """Relaxed PSD phase matrix for one slot, with its certified objective."""

    matrix: np.ndarray  # (M, M) Hermitian, unit diagonal
    objective: float  # bps/Hz, upper bound on any unit-modulus vector
    solver: str
    tolerance: float  # gap tolerance the solver was run at

    def __post_init__(self):
        v = np.asarray(self.matrix)
        if np.abs(np.diagonal(v) - 1.0).max() > 1e-6:
            raise ValueError("lifted phase matrix must have unit diagonal")
        object.__setattr__(self, "matrix", v)


def slot_phase_inputs(slot: SlotChannel, receiver: int, gamma: float):
    """Gain matrices (4, M, M) with the transmit SNR absorbed, plus weights (4,).

    Order of the joint states is LL, LN, NL, NN with the first letter the
    receiving link. gamma is P_tx / sigma^2 of the transmitting node.
    """
    from .rate import build_gain_matrix, joint_state_probs

    tx = 1 - receiver
    pairs = (
        (slot.los[receiver], slot.los[tx]),
        (slot.los[receiver], slot.nlos[tx]),
        (slot.nlos[receiver], slot.los[tx]),
        (slot.nlos[receiver], slot.nlos[tx]),
    )
    gains = np.stack([gamma * build_gain_matrix(h_rx, h_tx) for h_rx, h_tx in pairs])
    probs = joint_state_probs(float(slot.p_los[receiver]), float(slot.p_los[tx]))
    return gains, probs


def phase_objective(v: np.ndarray, gains: np.ndarray, probs: np.ndarray) -> float:
    """Expected rate of a unit-modulus vector v under the given gain matrices."""
    quads = np.maximum(np.einsum("m,fmk,k->f", np.conj(v), gains, v).real, 0.0)
    return float(np.dot(probs, np.log2(1.0 + quads)))


def sdr_objective(V: np.ndarray, gains: np.ndarray, probs: np.ndarray) -> float:
    """Expected rate of a lifted matrix V: sum of p * log2(1 + tr(V G))."""
    traces = np.einsum("ij,fji->f", V, gains).real
    if traces.min() < -1e-9:
        raise ValueError(f"negative trace {traces.min():.3e}; inputs are not PSD-consistent")
    return float(np.dot(probs, np.log2(1.0 + np.maximum(traces, 0.0))))


def solve_phase_sdr(gains: np.ndarray, probs: np.ndarray, solver: str | None = None) -> LiftedPhase:
    """Semidefinite relaxation of the per-slot phase problem.

    The returned objective upper-bounds every unit-modulus vector's rate.
    """
    m = gains.shape[-1]
    V = cp.Variable((m, m), hermitian=True)
    terms = []
    for f in range(4):
        if probs[f] > 0 and np.abs(gains[f]).max() > 0:
            terms.append(probs[f] * cp.log(1 + cp.real(cp.trace(V @ gains[f]))) / np.log(2))
    objective = cp.Maximize(cp.sum(terms) if terms else cp.Constant(0.0))
    problem = cp.Problem(objective, [V >> 0, cp.diag(V) == 1])
    settings = {
        "CLARABEL": {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "kwargs_tol": 1e-9},
        "SCS": {"kwargs_tol": 1e-5, "eps": 1e-6},
    }
    solvers = [solver] if solver else ["CLARABEL", "SCS"]
    last_exc: Exception | None = None
    for name in solvers:
        opts = dict(settings.get(name, {"kwargs_tol": 1e-6}))
        tol = opts.pop("kwargs_tol")
        try:
            with warnings.catch_warnings():
                # inaccurate statuses are acceptable; oracle tests gate quality
                warnings.simplefilter("ignore", UserWarning)
                problem.solve(solver=name, **opts)
        except cp.error.SolverError as exc:  # pragma: no cover - backend specific
            last_exc = exc
            continue
        if problem.status in ("optimal", "optimal_inaccurate"):
            v_val = np.asarray(V.value)
            # symmetrize and renormalize the diagonal against solver fuzz
            v_val = (v_val + v_val.conj().T) / 2
            np.fill_diagonal(v_val, 1.0)
            return LiftedPhase(
                matrix=v_val, objective=sdr_objective(v_val, gains, probs),
                solver=name, tolerance=tol,
            )
        last_exc = BackendError(f"{name} returned status {problem.status}")
    raise BackendError(f"phase SDR failed: {last_exc}")


def gaussian_randomization(
    V: np.ndarray, gains: np.ndarray, probs: np.ndarray, n_draws: int = 100, seed=0
):
    """Recover a unit-modulus vector from a relaxed matrix by sampling.

    Draws n_draws vectors from CN(0, V), projects entries onto the unit
    circle, and keeps the best. Returns (v, objective value).
    """
    m = V.shape[0]
    w, basis = np.linalg.eigh((V + V.conj().T) / 2)
    root = basis * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    draws = root @ (
        (rng.standard_normal((m, n_draws)) + 1j * rng.standard_normal((m, n_draws))) / np.sqrt(2)
    )
    mags = np.abs(draws)
    while (mags == 0).any():  # probability-zero guard
        bad = mags == 0
        redraw = (rng.standard_normal(int(bad.sum())) + 1j * rng.standard_normal(int(bad.sum()))) / np.sqrt(2)
        draws[bad] = redraw
        mags = np.abs(draws)
    candidates = (draws / mags).T  # (n_draws, M)
    quads = np.maximum(np.einsum("pm,fmk,pk->pf", np.conj(candidates), gains, candidates).real, 0.0)
    values = np.log2(1.0 + quads) @ probs
    best = int(np.argmax(values))
    return candidates[best], float(values[best])


def _golden_max(fun, lo: float, hi: float, iters: int = 40) -> float:
    """Golden-section search for the maximizer of fun on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return (a + b) / 2


def coordinate_ascent_phases(
    v0: np.ndarray,
    gains: np.ndarray,
    probs: np.ndarray,
    max_sweeps: int = 50,
    tol: float = 1e-9,
):
    """Element-wise ascent on the per-slot expected rate.

    Each step re-optimizes one element's phase along the unit circle (coarse
    grid bracket, then golden-section refinement); the objective never
    decreases. Returns (v, objective value).
    """
    v = np.asarray(v0, dtype=complex).copy()
    m = v.shape[0]
    if np.abs(np.abs(v) - 1.0).max() > 1e-9:
        raise ValueError("initial vector must be unit modulus")
    grid = np.exp(1j * np.linspace(0.0, 2 * np.pi, 65)[:-1])
    gv = np.einsum("fmk,k->fm", gains, v)  # (4, M) cache of G v
    quads = np.einsum("m,fm->f", np.conj(v), gv).real
    value = float(np.dot(probs, np.log2(1.0 + np.maximum(quads, 0.0))))
    for _ in range(max_sweeps):
        start_value = value
        for idx in range(m):
            s = gv[:, idx] - gains[:, idx, idx] * v[idx]  # (4,) coupling terms
            rest = quads - 2 * (np.conj(v[idx]) * s).real - gains[:, idx, idx].real

            def term_value(unit):
                q = np.maximum(rest + 2 * (np.conj(unit) * s).real + gains[:, idx, idx].real, 0.0)
                return float(np.dot(probs, np.log2(1.0 + q)))

            coarse = rest[None, :] + 2 * (np.conj(grid)[:, None] * s[None, :]).real + gains[:, idx, idx].real[None, :]
            coarse_vals = np.log2(1.0 + np.maximum(coarse, 0.0)) @ probs
            best = int(np.argmax(coarse_vals))
            theta0 = 2 * np.pi * best / grid.shape[0]
            width = 2 * np.pi / grid.shape[0]
            theta = _golden_max(lambda t: term_value(np.exp(1j * t)), theta0 - width, theta0 + width)
            new_unit = np.exp(1j * theta)
            if term_value(new_unit) < term_value(v[idx]):
                new_unit = v[idx]  # keep the incumbent on numerical ties
            gv += gains[:, :, idx] * (new_unit - v[idx])
            v[idx] = new_unit
            quads = rest + 2 * (np.conj(new_unit) * s).real + gains[:, idx, idx].real
        quads = np.einsum("m,fm->f", np.conj(v), np.einsum("fmk,k->fm", gains, v)).real
        gv = np.einsum("fmk,k->fm", gains, v)
        value = float(np.dot(probs, np.log2(1.0 + np.maximum(quads, 0.0))))
        if value - start_value < tol:
            break
    return v, value


def brute_force_phases(gains: np.ndarray, probs: np.ndarray, levels: int, budget: int = 10**7):
    """Exhaustive search over a uniform phase grid; the per-slot oracle.

    Enumerates levels^M phase combinations (capped at the budget) and
    returns (v, objective value) at the best grid point.
    """
    m = gains.shape[-1]
    total = levels**m
    if total > budget:
        raise BudgetExceeded(f"{levels}^{m} = {total} grid points exceeds the {budget} cap")
    angles = 2 * np.pi * np.arange(levels) / levels
    place = levels ** np.arange(m)
    best_value = -np.inf
    best_v = None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // place[None, :]) % levels
        candidates = np.exp(1j * angles[digits])  # (chunk, M)
        quads = np.maximum(
            np.einsum("pm,fmk,pk->pf", np.conj(candidates), gains, candidates).real, 0.0
        )
        values = np.log2(1.0 + quads) @ probs
        top = int(np.argmax(values))
        if values[top] > best_value:
            best_value = float(values[top])
            best_v = candidates[top]
    return best_v, best_value
