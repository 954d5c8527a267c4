"""Achievable-rate machinery for the two-hop reflected link.

The expected per-slot rate mixes four conditional rates (receiver side and
transmitter side each LoS or NLoS) weighted by the product of the two link
state probabilities. For trajectory design the same quantity is rewritten in
slack variables: reciprocal state-probability slacks x (LoS) and z (NLoS),
and squared-distance slacks y, with the four SNR numerators frozen into xi
coefficients evaluated at the current phases and array directions. The slack
form is jointly convex in (x, y, z), so its first-order Taylor expansion is a
global lower bound; that expansion is what the convex subproblems maximize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelGrid, SlotChannel

LOG2E = 1.0 / np.log(2.0)

_STATE_ORDER = ("ll", "ln", "nl", "nn")


@dataclass(frozen=True)
class PhasePlan:
    """Per-slot unit-modulus reflection coefficients, shape (N, M)."""

    coefficients: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", v)
        if v.ndim != 2:
            raise ValueError(f"phase plan must be (n_slots, n_elements), got {v.shape}")
        dev = np.abs(np.abs(v) - 1.0).max() if v.size else 0.0
        if dev > 1e-9:
            raise ValueError(f"reflection coefficients must be unit modulus (max dev {dev:.2e})")

    @property
    def n_slots(self) -> int:
        return self.coefficients.shape[0]


def identity_phases(n_slots: int, m: int) -> PhasePlan:
    return PhasePlan(np.ones((n_slots, m), dtype=complex))


@dataclass(frozen=True)
class RateTerms:
    """Conditional rates, their joint-state weights, and the expectation."""

    r_ll: float
    r_ln: float
    r_nl: float
    r_nn: float
    p_ll: float
    p_ln: float
    p_nl: float
    p_nn: float
    expected: float

    def rates(self) -> np.ndarray:
        return np.array([self.r_ll, self.r_ln, self.r_nl, self.r_nn])

    def probs(self) -> np.ndarray:
        return np.array([self.p_ll, self.p_ln, self.p_nl, self.p_nn])


@dataclass(frozen=True)
class XiCoefficients:
    """Frozen SNR numerators for one slot and receiving node, order LL/LN/NL/NN."""

    xi_ll: float
    xi_ln: float
    xi_nl: float
    xi_nn: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xi_ll, self.xi_ln, self.xi_nl, self.xi_nn])


@dataclass
class SlackState:
    """Slack variables per slot and node: x, z (dimensionless), y (m^2), angles (deg)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    phi: np.ndarray

    def copy(self) -> "SlackState":
        return SlackState(self.x.copy(), self.y.copy(), self.z.copy(), self.psi.copy(), self.phi.copy())

    def check(self, h_min: float, tol: float = 1e-9) -> None:
        if self.x.min() < 1 - tol or self.z.min() < 1 - tol:
            raise ValueError("slacks x and z must stay >= 1")
        if self.y.min() < h_min**2 - tol:
            raise ValueError("squared-distance slack fell below h_min^2")
        for name in ("psi", "phi"):
            ang = getattr(self, name)
            if ang.min() <= 0 or ang.max() > 90 + tol:
                raise ValueError(f"{name} must lie in (0, 90] degrees")


# ---------------------------------------------------------------------------
# Conditional and expected rates
# ---------------------------------------------------------------------------


def cascaded_gain(h_rx: np.ndarray, v: np.ndarray, h_tx: np.ndarray) -> float:
    """|sum_m conj(h_rx_m) * v_m * h_tx_m|^2, the reflected-link power gain."""
    h_rx, v, h_tx = (np.asarray(x) for x in (h_rx, v, h_tx))
    if not h_rx.shape == v.shape == h_tx.shape:
        raise ValueError(f"length mismatch: {h_rx.shape}, {v.shape}, {h_tx.shape}")
    t = np.sum(np.conj(h_rx) * v * h_tx)
    return float(np.abs(t) ** 2)


def build_gain_matrix(h_rx: np.ndarray, h_tx: np.ndarray) -> np.ndarray:
    """Rank-one PSD matrix G with trace(V G) = cascaded gain for V = v v^H."""
    c = np.conj(np.asarray(h_rx)) * np.asarray(h_tx)
    return np.outer(np.conj(c), c)


def conditional_rate(gain: float, gamma: float) -> float:
    """Spectral efficiency log2(1 + gamma * gain) in bps/Hz."""
    return float(np.log2(1.0 + gamma * gain))


def expected_rate(slot: SlotChannel, receiver: int, v: np.ndarray, gamma: float) -> RateTerms:
    """Expectation of the receiver's rate over the four joint link states.

    gamma is the transmit SNR factor P_tx / sigma^2 of the opposite node.
    """
    tx = 1 - receiver
    p_rx, p_tx = float(slot.p_los[receiver]), float(slot.p_los[tx])
    chans_rx = (slot.los[receiver], slot.nlos[receiver])
    chans_tx = (slot.los[tx], slot.nlos[tx])
    rates = []
    probs = []
    for frx, prx in ((0, p_rx), (1, 1 - p_rx)):
        for ftx, ptx in ((0, p_tx), (1, 1 - p_tx)):
            gain = cascaded_gain(chans_rx[frx], v, chans_tx[ftx])
            rates.append(conditional_rate(gain, gamma))
            probs.append(prx * ptx)
    expected = float(np.dot(probs, rates))
    return RateTerms(*rates, *probs, expected)


def expected_rates_matrix(
    grid: ChannelGrid,
    phases: PhasePlan,
    powers: np.ndarray,
    noise_power: float,
    los_forced: bool = False,
) -> np.ndarray:
    """Expected rate of every (slot, receiver) pair, shape (N, 2).

    With los_forced the LoS state is assumed certain on both links, which is
    the idealized deterministic-LoS design model.
    """
    v = phases.coefficients
    steer, fad = grid.steering, grid.fading
    n = steer.shape[0]
    rates = np.empty((n, 2))
    for k in (0, 1):
        kb = 1 - k
        a_ll = np.einsum("nm,nm,nm->n", np.conj(steer[:, k]), v, steer[:, kb])
        a_ln = np.einsum("nm,nm,m->n", np.conj(steer[:, k]), v, fad[kb])
        a_nl = np.einsum("m,nm,nm->n", np.conj(fad[k]), v, steer[:, kb])
        a_nn = np.einsum("m,nm,m->n", np.conj(fad[k]), v, fad[kb])
        gamma = powers[kb] / noise_power
        g = np.empty((n, 4))
        g[:, 0] = (grid.tau[:, k] * grid.tau[:, kb]) ** 2 * np.abs(a_ll) ** 2
        g[:, 1] = (grid.tau[:, k] * grid.zeta[:, kb]) ** 2 * np.abs(a_ln) ** 2
        g[:, 2] = (grid.zeta[:, k] * grid.tau[:, kb]) ** 2 * np.abs(a_nl) ** 2
        g[:, 3] = (grid.zeta[:, k] * grid.zeta[:, kb]) ** 2 * np.abs(a_nn) ** 2
        r = np.log2(1.0 + gamma * g)
        if los_forced:
            rates[:, k] = r[:, 0]
        else:
            w = joint_state_probs(grid.p_los[:, k], grid.p_los[:, kb])
            rates[:, k] = np.sum(w * r, axis=1)
    return rates


def joint_state_probs(p_rx, p_tx) -> np.ndarray:
    """Stack the four joint LoS/NLoS probabilities along the last axis."""
    p_rx, p_tx = np.asarray(p_rx), np.asarray(p_tx)
    return np.stack(
        [p_rx * p_tx, p_rx * (1 - p_tx), (1 - p_rx) * p_tx, (1 - p_rx) * (1 - p_tx)],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# Frozen-direction coefficients
# ---------------------------------------------------------------------------


def xi_coefficients(
    steer_rx: np.ndarray,
    steer_tx: np.ndarray,
    fading_rx: np.ndarray,
    fading_tx: np.ndarray,
    v: np.ndarray,
    p_tx: float,
    beta0: float,
    noise_power: float,
) -> XiCoefficients:
    """Frozen SNR numerators for one slot/receiver given current directions."""
    scale = p_tx * beta0**2 / noise_power
    vals = [
        scale * cascaded_gain(steer_rx, v, steer_tx),
        scale * cascaded_gain(steer_rx, v, fading_tx),
        scale * cascaded_gain(fading_rx, v, steer_tx),
        scale * cascaded_gain(fading_rx, v, fading_tx),
    ]
    return XiCoefficients(*vals)


def xi_grid(grid: ChannelGrid, phases: PhasePlan, powers: np.ndarray, beta0: float, noise_power: float) -> np.ndarray:
    """xi coefficients for all slots and receivers, shape (N, 2, 4)."""
    v = phases.coefficients
    steer, fad = grid.steering, grid.fading
    n = steer.shape[0]
    out = np.empty((n, 2, 4))
    for k in (0, 1):
        kb = 1 - k
        scale = powers[kb] * beta0**2 / noise_power
        a_ll = np.einsum("nm,nm,nm->n", np.conj(steer[:, k]), v, steer[:, kb])
        a_ln = np.einsum("nm,nm,m->n", np.conj(steer[:, k]), v, fad[kb])
        a_nl = np.einsum("m,nm,nm->n", np.conj(fad[k]), v, steer[:, kb])
        a_nn = np.einsum("m,nm,m->n", np.conj(fad[k]), v, fad[kb])
        for j, t in enumerate((a_ll, a_ln, a_nl, a_nn)):
            out[:, k, j] = scale * np.abs(t) ** 2
    return out


def frozen_direction_rates(
    xi: np.ndarray, dist: np.ndarray, p_los: np.ndarray, alpha_los: float, alpha_nlos: float
) -> np.ndarray:
    """Expected rates (N, 2) with frozen xi but live distances/probabilities.

    This is the objective the trajectory subproblems approximate: the SNR of
    each joint state is xi * d_rx^-alpha_rx * d_tx^-alpha_tx with exponents
    picked by the state letters, and the weights come from the live
    elevation-dependent probabilities.
    """
    n = xi.shape[0]
    rates = np.empty((n, 2))
    for k in (0, 1):
        kb = 1 - k
        d_k, d_kb = dist[:, k], dist[:, kb]
        snr = np.empty((n, 4))
        snr[:, 0] = xi[:, k, 0] * d_k ** (-alpha_los) * d_kb ** (-alpha_los)
        snr[:, 1] = xi[:, k, 1] * d_k ** (-alpha_los) * d_kb ** (-alpha_nlos)
        snr[:, 2] = xi[:, k, 2] * d_k ** (-alpha_nlos) * d_kb ** (-alpha_los)
        snr[:, 3] = xi[:, k, 3] * d_k ** (-alpha_nlos) * d_kb ** (-alpha_nlos)
        w = joint_state_probs(p_los[:, k], p_los[:, kb])
        rates[:, k] = np.sum(w * np.log2(1.0 + snr), axis=1)
    return rates


# ---------------------------------------------------------------------------
# Slack-variable form and its Taylor lower bound
# ---------------------------------------------------------------------------


def _log_bases(xi4, y_k, y_kb, alpha_los: float, alpha_nlos: float):
    """The four 1 + SNR bases of the slack-form rate (arrays broadcast)."""
    al2, an2 = alpha_los / 2.0, alpha_nlos / 2.0
    b = 1.0 + xi4[..., 0] / (y_k**al2 * y_kb**al2)
    c = 1.0 + xi4[..., 1] / (y_k**al2 * y_kb**an2)
    d = 1.0 + xi4[..., 2] / (y_k**an2 * y_kb**al2)
    e = 1.0 + xi4[..., 3] / (y_k**an2 * y_kb**an2)
    return b, c, d, e


def slack_rate(x_k, x_kb, y_k, y_kb, z_k, z_kb, xi4, alpha_los: float, alpha_nlos: float):
    """Rate in slack variables; equals the expected rate at equality slacks.

    Jointly convex in (x, y, z) and decreasing in each slack, which is what
    makes the Taylor expansion below a global under-estimator.
    """
    b, c, d, e = _log_bases(np.asarray(xi4), y_k, y_kb, alpha_los, alpha_nlos)
    return (
        np.log2(b) / (x_k * x_kb)
        + np.log2(c) / (x_k * z_kb)
        + np.log2(d) / (z_k * x_kb)
        + np.log2(e) / (z_k * z_kb)
    )


def slack_rate_taylor(x_k, x_kb, y_k, y_kb, z_k, z_kb, xi4, alpha_los: float, alpha_nlos: float):
    """Value and the six partial derivatives of slack_rate at the given point.

    Returns (value, dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb), all broadcast to
    the input shape. The y-derivatives use d/dy [y^(-a/2)] = -(a/2) y^(-a/2-1),
    folded into the ratio (base-1)/base to avoid recomputing powers.
    """
    xi4 = np.asarray(xi4)
    aL, aN = alpha_los, alpha_nlos
    b, c, d, e = _log_bases(xi4, y_k, y_kb, aL, aN)
    lb, lc, ld, le = np.log2(b), np.log2(c), np.log2(d), np.log2(e)
    value = lb / (x_k * x_kb) + lc / (x_k * z_kb) + ld / (z_k * x_kb) + le / (z_k * z_kb)
    dx_k = -(lb / (x_k**2 * x_kb) + lc / (x_k**2 * z_kb))
    dx_kb = -(lb / (x_k * x_kb**2) + ld / (z_k * x_kb**2))
    dz_k = -(ld / (z_k**2 * x_kb) + le / (z_k**2 * z_kb))
    dz_kb = -(lc / (x_k * z_kb**2) + le / (z_k * z_kb**2))
    rb, rc, rd, re = (b - 1) / b, (c - 1) / c, (d - 1) / d, (e - 1) / e
    dy_k = -(LOG2E / (2 * y_k)) * (
        aL * rb / (x_k * x_kb) + aL * rc / (x_k * z_kb) + aN * rd / (z_k * x_kb) + aN * re / (z_k * z_kb)
    )
    dy_kb = -(LOG2E / (2 * y_kb)) * (
        aL * rb / (x_k * x_kb) + aN * rc / (x_k * z_kb) + aL * rd / (z_k * x_kb) + aN * re / (z_k * z_kb)
    )
    return value, dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb


def rate_in_slacks(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    xi: XiCoefficients,
    receiver: int,
    alpha_los: float,
    alpha_nlos: float,
) -> float:
    """Single-slot slack-form rate; x, y, z are per-node pairs (length 2)."""
    k, kb = receiver, 1 - receiver
    return float(
        slack_rate(x[k], x[kb], y[k], y[kb], z[k], z[kb], xi.as_array(), alpha_los, alpha_nlos)
    )


def taylor_rate_lower_bound(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    x0: np.ndarray,
    y0: np.ndarray,
    z0: np.ndarray,
    xi: XiCoefficients,
    receiver: int,
    alpha_los: float,
    alpha_nlos: float,
) -> float:
    """Affine global lower bound of rate_in_slacks, expanded at (x0, y0, z0).

    Exact (value and gradient) at the expansion point.
    """
    k, kb = receiver, 1 - receiver
    val, dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb = slack_rate_taylor(
        x0[k], x0[kb], y0[k], y0[kb], z0[k], z0[kb], xi.as_array(), alpha_los, alpha_nlos
    )
    return float(
        val
        + dx_k * (x[k] - x0[k])
        + dx_kb * (x[kb] - x0[kb])
        + dy_k * (y[k] - y0[k])
        + dy_kb * (y[kb] - y0[kb])
        + dz_k * (z[k] - z0[k])
        + dz_kb * (z[kb] - z0[kb])
    )
