"""Problem instances: node geometry, environment, RIS array, UAV kinematics.

Everything is stored in linear SI units (meters, watts, seconds). dB-valued
inputs are converted once when a config is loaded, never downstream.

The config format is flat ``key = value`` text with dotted section prefixes,
e.g. ``env.a = 11.95`` or ``limits.h_min_m = 100``. Missing keys fall back to
the default two-node urban setup (nodes at x=0 and x=800 m, UAV corridor from
(-200,-200) to (1000,200), 10x10 RIS at half-wavelength spacing).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_ALTITUDE_M = 200.0  # initial cruise altitude


@dataclass(frozen=True)
class GroundNode:
    """A fixed single-antenna ground node at altitude 0."""

    position: np.ndarray  # (2,) meters
    transmit_power: float  # watts

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (2,) or not np.all(np.isfinite(pos)):
            raise ConfigError(f"node position must be finite 2D, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        if not (self.transmit_power > 0 and math.isfinite(self.transmit_power)):
            raise ConfigError(f"transmit_power must be positive, got {self.transmit_power}")


@dataclass(frozen=True)
class RisGeometry:
    """Uniform planar array mounted under the UAV."""

    rows: int
    cols: int
    element_spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"ris rows/cols must be >= 1, got {self.rows}x{self.cols}")
        if not self.element_spacing_over_wavelength > 0:
            raise ConfigError("ris element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class EnvironmentParams:
    """Sigmoid LoS-probability parameters plus path-loss and noise figures."""

    a: float = 11.95
    b: float = 0.14  # per degree
    alpha_los: float = 2.2
    alpha_nlos: float = 3.2
    beta0: float = 1e-4  # channel power at 1 m, linear
    noise_power: float = 10 ** (-169 / 10) * 1e-3  # watts

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("sigmoid parameters a, b must be positive")
        if not (self.alpha_los > 0 and self.alpha_nlos >= self.alpha_los):
            raise ConfigError("need alpha_nlos >= alpha_los > 0")
        if not (self.beta0 > 0 and self.noise_power > 0):
            raise ConfigError("beta0 and noise_power must be positive")


@dataclass(frozen=True)
class KinematicLimits:
    """Per-slot motion caps and the altitude box.

    ``max_horizontal_step`` / ``max_vertical_step`` are already multiplied by
    the slot length (meters per slot, not meters per second).
    """

    max_horizontal_step: float
    max_vertical_step: float
    h_min: float
    h_max: float
    start: np.ndarray  # (2,)
    finish: np.ndarray  # (2,)

    def __post_init__(self):
        if not (self.max_horizontal_step > 0 and self.max_vertical_step > 0):
            raise ConfigError("per-slot step limits must be positive")
        if not 0 < self.h_min:
            raise ConfigError("h_min must be positive")
        if self.h_min > self.h_max:
            raise ConfigError(f"h_min exceeds h_max ({self.h_min} > {self.h_max})")
        for name in ("start", "finish"):
            p = np.asarray(getattr(self, name), dtype=float)
            if p.shape != (2,) or not np.all(np.isfinite(p)):
                raise ConfigError(f"{name} must be finite 2D coordinates")
            object.__setattr__(self, name, p)


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance shared by every optimization stage."""

    nodes: tuple[GroundNode, GroundNode]
    ris: RisGeometry
    env: EnvironmentParams
    limits: KinematicLimits
    n_slots: int
    slot_seconds: float = 1.0
    fading_seed: int = 7

    def __post_init__(self):
        if len(self.nodes) != 2:
            raise ConfigError(f"exactly two ground nodes are supported, got {len(self.nodes)}")
        if self.n_slots < 2:
            raise ConfigError(f"n_slots must be >= 2, got {self.n_slots}")
        if not self.slot_seconds > 0:
            raise ConfigError("slot_seconds must be positive")
        # The UAV has n_slots steps from start (slot 1) to the virtual
        # end-of-mission position, so the corridor must fit in that budget.
        reach = self.n_slots * self.limits.max_horizontal_step
        dist = float(np.linalg.norm(self.limits.finish - self.limits.start))
        if dist > reach + 1e-9:
            raise ConfigError(
                f"finish unreachable: start-finish distance {dist:.1f} m exceeds "
                f"{self.n_slots} slots x {self.limits.max_horizontal_step:.1f} m"
            )

    @property
    def duration(self) -> float:
        return self.n_slots * self.slot_seconds

    def gamma(self, transmitter: int) -> float:
        """Transmit SNR factor P_tx / sigma^2 for the given transmitting node."""
        return self.nodes[transmitter].transmit_power / self.env.noise_power

    def node_positions(self) -> np.ndarray:
        return np.stack([n.position for n in self.nodes])


@dataclass(frozen=True)
class Trajectory:
    """Per-slot UAV way-points: horizontal (N,2) and altitude (N,)."""

    horizontal: np.ndarray
    vertical: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.horizontal, dtype=float)
        h = np.asarray(self.vertical, dtype=float)
        if q.ndim != 2 or q.shape[1] != 2 or h.shape != (q.shape[0],):
            raise ConfigError(f"trajectory shapes inconsistent: {q.shape} vs {h.shape}")
        object.__setattr__(self, "horizontal", q)
        object.__setattr__(self, "vertical", h)

    @property
    def n_slots(self) -> int:
        return self.horizontal.shape[0]


def validate_trajectory(traj: Trajectory, scenario: Scenario, tol: float = 1e-6) -> None:
    """Check the mobility constraints; raises ConfigError naming the violation.

    Enforced: start pinned, per-slot horizontal/vertical step caps, the
    altitude box, and reachability of the finish point in one extra step.
    """
    lim = scenario.limits
    q, h = traj.horizontal, traj.vertical
    if traj.n_slots != scenario.n_slots:
        raise ConfigError(f"trajectory has {traj.n_slots} slots, scenario {scenario.n_slots}")
    if np.linalg.norm(q[0] - lim.start) > tol:
        raise ConfigError("trajectory does not start at the configured start point")
    steps = np.linalg.norm(np.diff(q, axis=0), axis=1)
    if steps.size and steps.max() > lim.max_horizontal_step + tol:
        n = int(np.argmax(steps))
        raise ConfigError(f"horizontal step {steps[n]:.6f} m at slot {n + 1} exceeds cap")
    if np.linalg.norm(lim.finish - q[-1]) > lim.max_horizontal_step + tol:
        raise ConfigError("final way-point cannot reach the finish position in one step")
    vsteps = np.abs(np.diff(h))
    if vsteps.size and vsteps.max() > lim.max_vertical_step + tol:
        n = int(np.argmax(vsteps))
        raise ConfigError(f"vertical step {vsteps[n]:.6f} m at slot {n + 1} exceeds cap")
    if h.min() < lim.h_min - tol or h.max() > lim.h_max + tol:
        raise ConfigError("altitude leaves the [h_min, h_max] box")


def initial_trajectory(scenario: Scenario) -> Trajectory:
    """Straight-line initialization at a fixed cruise altitude.

    The UAV heads from start toward finish at the per-slot step cap, then
    holds position once the finish is reached. Altitude is constant at
    200 m, clamped into the altitude box.
    """
    lim = scenario.limits
    n = scenario.n_slots
    q = np.empty((n, 2))
    q[0] = lim.start
    for i in range(1, n):
        gap = lim.finish - q[i - 1]
        remaining = float(np.linalg.norm(gap))
        if remaining <= lim.max_horizontal_step:
            q[i] = lim.finish
        else:
            q[i] = q[i - 1] + gap * (lim.max_horizontal_step / remaining)
    alt = float(np.clip(DEFAULT_ALTITUDE_M, lim.h_min, lim.h_max))
    traj = Trajectory(horizontal=q, vertical=np.full(n, alt))
    validate_trajectory(traj, scenario, tol=1e-9)
    return traj


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "n_slots": 150,
    "slot_seconds": 1.0,
    "fading_seed": 7,
    "nodes.1.x": 0.0,
    "nodes.1.y": 0.0,
    "nodes.1.power_w": 0.1,
    "nodes.2.x": 800.0,
    "nodes.2.y": 0.0,
    "nodes.2.power_w": 0.1,
    "ris.rows": 10,
    "ris.cols": 10,
    "ris.spacing_over_wavelength": 0.5,
    "env.a": 11.95,
    "env.b": 0.14,
    "env.alpha_los": 2.2,
    "env.alpha_nlos": 3.2,
    "limits.v_max_horizontal_ms": 40.0,
    "limits.v_max_vertical_ms": 20.0,
    "limits.h_min_m": 100.0,
    "limits.h_max_m": 500.0,
    "limits.start_x": -200.0,
    "limits.start_y": -200.0,
    "limits.finish_x": 1000.0,
    "limits.finish_y": 200.0,
}

_INT_KEYS = {"n_slots", "fading_seed", "ris.rows", "ris.cols"}


def _parse_kv(source: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_scenario(source: str) -> Scenario:
    """Build a validated Scenario from flat key/value config text.

    Unset keys take the default urban two-node values. Noise power and the
    1 m reference gain may be given either in linear watts (``env.noise_w``,
    ``env.beta0``) or on the usual log scales (``env.noise_dbm``,
    ``env.beta0_db``); internally everything is linear.
    """
    raw = _parse_kv(source)

    def number(key: str):
        text = raw.pop(key, None)
        if text is None:
            return _DEFAULTS[key]
        try:
            return int(text) if key in _INT_KEYS else float(text)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: cannot parse {text!r}") from exc

    def linear_or_db(linear_key: str, db_key: str, default_linear: float, db_to_linear):
        if linear_key in raw and db_key in raw:
            raise ConfigError(f"give only one of {linear_key!r} and {db_key!r}")
        if linear_key in raw:
            return float(raw.pop(linear_key))
        if db_key in raw:
            return db_to_linear(float(raw.pop(db_key)))
        return default_linear

    beta0 = linear_or_db("env.beta0", "env.beta0_db", 1e-4, lambda db: 10 ** (db / 10))
    noise = linear_or_db(
        "env.noise_w", "env.noise_dbm", 10 ** (-169 / 10) * 1e-3,
        lambda dbm: 10 ** (dbm / 10) * 1e-3,
    )

    n_slots = number("n_slots")
    slot_seconds = number("slot_seconds")
    nodes = tuple(
        GroundNode(
            position=np.array([number(f"nodes.{k}.x"), number(f"nodes.{k}.y")]),
            transmit_power=number(f"nodes.{k}.power_w"),
        )
        for k in (1, 2)
    )
    ris = RisGeometry(
        rows=number("ris.rows"),
        cols=number("ris.cols"),
        element_spacing_over_wavelength=number("ris.spacing_over_wavelength"),
    )
    env = EnvironmentParams(
        a=number("env.a"),
        b=number("env.b"),
        alpha_los=number("env.alpha_los"),
        alpha_nlos=number("env.alpha_nlos"),
        beta0=beta0,
        noise_power=noise,
    )
    limits = KinematicLimits(
        max_horizontal_step=number("limits.v_max_horizontal_ms") * slot_seconds,
        max_vertical_step=number("limits.v_max_vertical_ms") * slot_seconds,
        h_min=number("limits.h_min_m"),
        h_max=number("limits.h_max_m"),
        start=np.array([number("limits.start_x"), number("limits.start_y")]),
        finish=np.array([number("limits.finish_x"), number("limits.finish_y")]),
    )
    scenario = Scenario(
        nodes=nodes,
        ris=ris,
        env=env,
        limits=limits,
        n_slots=n_slots,
        slot_seconds=slot_seconds,
        fading_seed=number("fading_seed"),
    )
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    return scenario


def save_scenario(scenario: Scenario) -> str:
    """Serialize to the flat config format; load_scenario round-trips exactly."""
    s = scenario
    dt = s.slot_seconds

    def num(value) -> str:
        return repr(float(value))  # shortest exact round-trip repr

    lines = [
        f"n_slots = {s.n_slots}",
        f"slot_seconds = {num(s.slot_seconds)}",
        f"fading_seed = {s.fading_seed}",
    ]
    for k, node in enumerate(s.nodes, start=1):
        lines += [
            f"nodes.{k}.x = {num(node.position[0])}",
            f"nodes.{k}.y = {num(node.position[1])}",
            f"nodes.{k}.power_w = {num(node.transmit_power)}",
        ]
    lines += [
        f"ris.rows = {s.ris.rows}",
        f"ris.cols = {s.ris.cols}",
        f"ris.spacing_over_wavelength = {num(s.ris.element_spacing_over_wavelength)}",
        f"env.a = {num(s.env.a)}",
        f"env.b = {num(s.env.b)}",
        f"env.alpha_los = {num(s.env.alpha_los)}",
        f"env.alpha_nlos = {num(s.env.alpha_nlos)}",
        f"env.beta0 = {num(s.env.beta0)}",
        f"env.noise_w = {num(s.env.noise_power)}",
        f"limits.v_max_horizontal_ms = {num(s.limits.max_horizontal_step / dt)}",
        f"limits.v_max_vertical_ms = {num(s.limits.max_vertical_step / dt)}",
        f"limits.h_min_m = {num(s.limits.h_min)}",
        f"limits.h_max_m = {num(s.limits.h_max)}",
        f"limits.start_x = {num(s.limits.start[0])}",
        f"limits.start_y = {num(s.limits.start[1])}",
        f"limits.finish_x = {num(s.limits.finish[0])}",
        f"limits.finish_y = {num(s.limits.finish[1])}",
    ]
    return "\n".join(lines) + "\n"


def with_slots(scenario: Scenario, n_slots: int) -> Scenario:
    """Copy of the scenario with a different time horizon."""
    return dataclasses.replace(scenario, n_slots=n_slots)


def with_ris_elements(scenario: Scenario, rows: int, cols: int) -> Scenario:
    """Copy of the scenario with a different RIS array size."""
    return dataclasses.replace(scenario, ris=dataclasses.replace(scenario.ris, rows=rows, cols=cols))
