"""Air-ground channel model: geometry, LoS probability, array responses.

Each ground-UAV link is in LoS or NLoS state per slot. The LoS probability
follows the elevation-angle sigmoid 1 / (1 + a*exp(-b*(psi - a))) with psi in
degrees; conditioned on the state, the channel is either a distance-scaled
UPA steering vector or a distance-scaled fixed small-scale fading draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import EnvironmentParams, RisGeometry, Scenario, Trajectory


def elevation_angle_deg(q, h: float, w) -> float:
    """Elevation angle (degrees) seen from ground point w toward (q, h).

    Equals 90 when the UAV is directly overhead.
    """
    if not h > 0:
        raise ValueError(f"altitude must be positive, got {h}")
    r = float(np.linalg.norm(np.asarray(q, dtype=float) - np.asarray(w, dtype=float)))
    return float(np.degrees(np.arctan2(h, r)))


def los_probability(psi_deg, a: float, b: float):
    """Sigmoid LoS probability in the elevation angle (degrees)."""
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(psi_deg, dtype=float) - a)))


def slot_distance(q, h: float, w) -> float:
    """3D distance between the UAV at (q, h) and ground point w."""
    if not h > 0:
        raise ValueError(f"altitude must be positive, got {h}")
    d2 = float(np.sum((np.asarray(q, dtype=float) - np.asarray(w, dtype=float)) ** 2))
    return float(np.sqrt(d2 + h * h))


def steering_vector(q, h: float, w, ris: RisGeometry) -> np.ndarray:
    """Unit-modulus UPA response for the direction from w up to (q, h).

    Entry (m_x, m_y), flattened row-major, carries the phase
    -2*pi*(d/lambda) * ((m_x-1)*u + (m_y-1)*v) with direction cosines
    u = (x - x_w)/d and v = (y - y_w)/d.
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    d = slot_distance(q, h, w)
    u = (q[0] - w[0]) / d
    v = (q[1] - w[1]) / d
    s = ris.element_spacing_over_wavelength
    row = np.exp(-2j * np.pi * s * u * np.arange(ris.rows))
    col = np.exp(-2j * np.pi * s * v * np.arange(ris.cols))
    return np.kron(row, col)


def los_channel(q, h: float, w, ris: RisGeometry, env: EnvironmentParams) -> np.ndarray:
    """LoS-conditioned channel: steering vector scaled by sqrt(beta0 * d^-alpha_L)."""
    d = slot_distance(q, h, w)
    tau = np.sqrt(env.beta0 * d ** (-env.alpha_los))
    return tau * steering_vector(q, h, w, ris)


def nlos_channel(q, h: float, w, env: EnvironmentParams, fading: np.ndarray) -> np.ndarray:
    """NLoS-conditioned channel: fixed fading scaled by sqrt(beta0 * d^-alpha_N)."""
    d = slot_distance(q, h, w)
    zeta = np.sqrt(env.beta0 * d ** (-env.alpha_nlos))
    return zeta * np.asarray(fading)


def sample_fading(m: int, seed) -> np.ndarray:
    """Draw m i.i.d. unit-variance circularly symmetric complex Gaussians."""
    if m < 1:
        raise ValueError(f"need at least one element, got {m}")
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)


def scenario_fading(scenario: Scenario) -> np.ndarray:
    """Per-node fading draws (2, M), fixed for a whole run by the scenario seed."""
    m = scenario.ris.n_elements
    return np.stack(
        [sample_fading(m, [scenario.fading_seed, k]) for k in range(2)]
    )


@dataclass(frozen=True)
class SlotChannel:
    """Channel state of one slot, both nodes: index 0 is node 1, index 1 node 2."""

    distance: np.ndarray  # (2,) meters
    elevation_deg: np.ndarray  # (2,)
    p_los: np.ndarray  # (2,)
    los: np.ndarray  # (2, M) complex
    nlos: np.ndarray  # (2, M) complex


@dataclass(frozen=True)
class ChannelGrid:
    """Vectorized channel state across all slots.

    steering holds the unit-modulus direction responses; the conditioned
    channels are tau/zeta scalings of steering and of the fixed fading.
    """

    distance: np.ndarray  # (N, 2)
    elevation_deg: np.ndarray  # (N, 2)
    p_los: np.ndarray  # (N, 2)
    steering: np.ndarray  # (N, 2, M) complex
    tau: np.ndarray  # (N, 2) LoS amplitude scale
    zeta: np.ndarray  # (N, 2) NLoS amplitude scale
    fading: np.ndarray  # (2, M) complex

    def slot(self, n: int) -> SlotChannel:
        return SlotChannel(
            distance=self.distance[n],
            elevation_deg=self.elevation_deg[n],
            p_los=self.p_los[n],
            los=self.tau[n][:, None] * self.steering[n],
            nlos=self.zeta[n][:, None] * self.fading,
        )


def compute_channel_grid(
    scenario: Scenario, traj: Trajectory, fading: np.ndarray
) -> ChannelGrid:
    """Evaluate geometry, LoS probabilities, and array responses for all slots."""
    env = scenario.env
    ris = scenario.ris
    q = traj.horizontal  # (N, 2)
    h = traj.vertical  # (N,)
    w = scenario.node_positions()  # (2, 2)
    delta = q[:, None, :] - w[None, :, :]  # (N, 2, 2)
    rho = np.linalg.norm(delta, axis=2)  # horizontal range (N, 2)
    dist = np.sqrt(rho**2 + h[:, None] ** 2)
    psi = np.degrees(np.arctan2(h[:, None], rho))
    plos = los_probability(psi, env.a, env.b)
    u = delta / dist[:, :, None]  # direction cosines (N, 2, 2)
    s = ris.element_spacing_over_wavelength
    row = np.exp(-2j * np.pi * s * u[:, :, 0, None] * np.arange(ris.rows))  # (N,2,Mx)
    col = np.exp(-2j * np.pi * s * u[:, :, 1, None] * np.arange(ris.cols))  # (N,2,My)
    steer = (row[:, :, :, None] * col[:, :, None, :]).reshape(
        q.shape[0], 2, ris.n_elements
    )
    tau = np.sqrt(env.beta0 * dist ** (-env.alpha_los))
    zeta = np.sqrt(env.beta0 * dist ** (-env.alpha_nlos))
    return ChannelGrid(
        distance=dist,
        elevation_deg=psi,
        p_los=plos,
        steering=steer,
        tau=tau,
        zeta=zeta,
        fading=np.asarray(fading),
    )
