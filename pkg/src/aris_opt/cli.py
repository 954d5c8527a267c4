"""Command-line front end: optimize / sweep / validate.

Results land as RFC-4180-style CSV files (header row, dot decimals) plus
rendered PNG figures in the output directory. Exit codes: 0 success,
2 configuration error, 3 solver backend error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report, validator
from .channel import compute_channel_grid, scenario_fading
from .errors import BackendError, ConfigError
from .optimizer import SCHEMES, SchemeConfig, alternating_optimize, run_scheme_comparison
from .rate import XiCoefficients, identity_phases, rate_in_slacks, taylor_rate_lower_bound
from .scenario import Scenario, initial_trajectory, load_scenario
from .trajectory_opt import init_slacks, linearize_elevation_upper
from .scheduling import solve_schedule_lp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_VALIDATION = 4


@dataclass(frozen=True)
class RunManifest:
    scenario_path: str | None
    scheme: str
    sweep: str | None
    values: tuple[float, ...]
    out_dir: Path
    seed: int | None
    epsilon: float
    max_iterations: int
    n_samples: int = 100_000

    def __post_init__(self):
        if self.sweep not in (None, "T", "M"):
            raise ConfigError(f"sweep must be T or M, got {self.sweep!r}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load(manifest: RunManifest) -> Scenario:
    if manifest.scenario_path is None:
        scenario = load_scenario("")
    else:
        path = Path(manifest.scenario_path)
        if not path.exists():
            raise ConfigError(f"scenario file not found: {path}")
        scenario = load_scenario(path.read_text(encoding="utf-8"))
    if manifest.seed is not None:
        scenario = dataclasses.replace(scenario, fading_seed=manifest.seed)
    return scenario


def _worker_count() -> int:
    raw = os.environ.get("ARIS_OPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ARIS_OPT_THREADS must be an integer, got {raw!r}")


def cmd_optimize(manifest: RunManifest) -> int:
    scenario = _load(manifest)
    config = SchemeConfig(
        scheme=manifest.scheme, epsilon=manifest.epsilon, max_iterations=manifest.max_iterations
    )
    state = alternating_optimize(scenario, config)
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)

    grid = compute_channel_grid(scenario, state.trajectory, state.fading)
    slots = np.arange(1, scenario.n_slots + 1)
    _write_csv(
        out / "trajectory.csv",
        ["slot", "x_m", "y_m", "h_m", "psi1_deg", "psi2_deg", "plos1", "plos2"],
        [
            (
                int(n), state.trajectory.horizontal[i, 0], state.trajectory.horizontal[i, 1],
                state.trajectory.vertical[i], grid.elevation_deg[i, 0], grid.elevation_deg[i, 1],
                grid.p_los[i, 0], grid.p_los[i, 1],
            )
            for i, n in enumerate(slots)
        ],
    )
    schedule = state.binary_schedule
    _write_csv(
        out / "schedule.csv",
        ["slot", "alpha1", "alpha2"],
        [(int(n), schedule.alpha[i, 0], schedule.alpha[i, 1]) for i, n in enumerate(slots)],
    )
    ris = scenario.ris
    theta = np.mod(np.angle(state.phases.coefficients), 2 * np.pi)
    _write_csv(
        out / "phases.csv",
        ["slot", "element_row", "element_col", "theta_rad"],
        [
            (int(n), mx + 1, my + 1, theta[i, mx * ris.cols + my])
            for i, n in enumerate(slots)
            for mx in range(ris.rows)
            for my in range(ris.cols)
        ],
    )
    _write_csv(
        out / "convergence.csv",
        ["iteration", "eta_bpshz"],
        [(i + 1, eta) for i, eta in enumerate(state.eta_history)],
    )
    _write_csv(
        out / "summary.csv",
        ["scheme", "eta_final", "iterations", "converged"],
        [(manifest.scheme, state.eta_plc, state.iteration, state.converged)],
    )
    report.render_run_figures(out, state)
    print(f"scheme {manifest.scheme}: eta = {state.eta_plc:.6f} bps/Hz after "
          f"{state.iteration} iterations (converged={state.converged})")
    return EXIT_OK


def cmd_sweep(manifest: RunManifest) -> int:
    if manifest.sweep is None:
        raise ConfigError("sweep command needs --sweep {T|M} and --values")
    if not manifest.values:
        raise ConfigError("sweep command needs a non-empty --values list")
    scenario = _load(manifest)
    rows = run_scheme_comparison(
        scenario,
        schemes=SCHEMES,
        sweep=manifest.sweep,
        values=manifest.values,
        epsilon=manifest.epsilon,
        max_iterations=manifest.max_iterations,
        max_workers=_worker_count(),
    )
    rows = sorted(rows, key=lambda r: (r[0], SCHEMES.index(r[1])))
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", ["sweep_value", "scheme", "eta_bpshz"], rows)
    report.render_sweep_figure(out, rows)
    for value, scheme, eta in rows:
        print(f"{manifest.sweep}={_fmt(value)} {scheme}: eta = {eta:.6f} bps/Hz")
    return EXIT_OK


def cmd_validate(manifest: RunManifest) -> int:
    scenario = _load(manifest)
    rng = np.random.default_rng(scenario.fading_seed)
    fading = scenario_fading(scenario)
    traj = initial_trajectory(scenario)
    grid = compute_channel_grid(scenario, traj, fading)
    phases = identity_phases(scenario.n_slots, scenario.ris.n_elements)
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str):
        checks.append((name, bool(ok), detail))

    from .rate import expected_rate

    # closed form vs explicit state enumeration
    worst = 0.0
    for n in rng.choice(scenario.n_slots, size=min(8, scenario.n_slots), replace=False):
        slot = grid.slot(int(n))
        for k in (0, 1):
            closed = expected_rate(slot, k, phases.coefficients[n], scenario.gamma(1 - k)).expected
            enum = validator.enumeration_expected_rate(slot, k, phases.coefficients[n], scenario.gamma(1 - k))
            worst = max(worst, abs(closed - enum))
    check("expected-rate-enumeration", worst <= 1e-12, f"max |closed - enum| = {worst:.2e}")

    # Monte-Carlo agreement
    slot = grid.slot(scenario.n_slots // 2)
    rep = validator.monte_carlo_expected_rate(
        slot, 0, phases.coefficients[scenario.n_slots // 2], scenario.gamma(1),
        manifest.n_samples, seed=scenario.fading_seed,
    )
    check(
        "monte-carlo-z",
        abs(rep.z_score) <= 4.0,
        f"mean {rep.empirical_mean:.6f} vs {rep.closed_form:.6f}, "
        f"se {rep.std_error:.2e}, z {rep.z_score:+.2f} (n={rep.n_samples})",
    )

    # Taylor lower bound around the initial iterate
    from .rate import xi_grid as _xi_grid

    powers = np.array([node.transmit_power for node in scenario.nodes])
    xi = _xi_grid(grid, phases, powers, scenario.env.beta0, scenario.env.noise_power)
    slacks = init_slacks(traj, scenario)
    env = scenario.env
    violations = 0
    eq_err = 0.0
    for _ in range(200):
        n = int(rng.integers(scenario.n_slots))
        k = int(rng.integers(2))
        xi4 = XiCoefficients(*xi[n, k])
        x0, y0, z0 = slacks.x[n], slacks.y[n], slacks.z[n]
        scale = 1.0 + rng.uniform(0, 0.5, size=(3, 2))
        x1, y1, z1 = x0 * scale[0], y0 * scale[1], z0 * scale[2]
        bound = taylor_rate_lower_bound(x1, y1, z1, x0, y0, z0, xi4, k, env.alpha_los, env.alpha_nlos)
        true = rate_in_slacks(x1, y1, z1, xi4, k, env.alpha_los, env.alpha_nlos)
        if bound > true + 1e-9:
            violations += 1
        eq_err = max(
            eq_err,
            abs(
                taylor_rate_lower_bound(x0, y0, z0, x0, y0, z0, xi4, k, env.alpha_los, env.alpha_nlos)
                - rate_in_slacks(x0, y0, z0, xi4, k, env.alpha_los, env.alpha_nlos)
            ),
        )
    check("taylor-lower-bound", violations == 0 and eq_err <= 1e-9,
          f"{violations} violations, expansion mismatch {eq_err:.2e}")

    # elevation-angle linearization is a global under-estimator
    bad = 0
    for _ in range(2000):
        r_prev, r, h = rng.uniform(1, 2000), rng.uniform(1, 2000), rng.uniform(50, 500)
        f_rad, g_slope, r0 = linearize_elevation_upper(np.array([r_prev, 0.0]), h, np.zeros(2))
        affine = np.degrees(f_rad - g_slope * (r - r0))
        true = np.degrees(np.arctan(h / r))
        if affine > true + 1e-9:
            bad += 1
    check("elevation-linearization", bad == 0, f"{bad} of 2000 triples violated")

    # scheduling LP vs the threshold oracle
    worst_lp = 0.0
    for _ in range(20):
        rates = rng.uniform(0, 4, size=(int(rng.integers(2, 13)), 2))
        lp = solve_schedule_lp(rates).eta
        oracle = validator.schedule_threshold_oracle(rates)
        worst_lp = max(worst_lp, abs(lp - oracle))
    check("schedule-lp-oracle", worst_lp <= 1e-6, f"max |LP - oracle| = {worst_lp:.2e}")

    width = max(len(name) for name, _, _ in checks)
    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    if failed:
        print(f"{len(failed)} of {len(checks)} validation checks failed")
        return EXIT_VALIDATION
    print(f"all {len(checks)} validation checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aris-opt",
        description="Max-min rate design for a UAV-mounted RIS relay under a probabilistic LoS channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("optimize", "run one scheme and write trajectory/schedule/phase/convergence CSVs"),
        ("sweep", "compare schemes across a horizon (T) or array-size (M) sweep"),
        ("validate", "run the Monte-Carlo and oracle cross-checks"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--scenario", type=str, default=None, help="scenario config path")
        p.add_argument("--scheme", choices=SCHEMES, default="plc")
        p.add_argument("--sweep", choices=["T", "M"], default=None)
        p.add_argument("--values", type=str, default=None, help="comma-separated sweep values")
        p.add_argument("--seed", type=int, default=None, help="override the fading seed")
        p.add_argument("--epsilon", type=float, default=1e-3)
        p.add_argument("--max-iters", type=int, default=50)
        p.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo sample count")
        p.add_argument("--out", type=str, default="out")
    return parser


def manifest_from_args(args) -> RunManifest:
    values: tuple[float, ...] = ()
    if args.values:
        try:
            values = tuple(float(v) for v in args.values.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse --values {args.values!r}")
    return RunManifest(
        scenario_path=args.scenario,
        scheme=args.scheme,
        sweep=args.sweep,
        values=values,
        out_dir=Path(args.out),
        seed=args.seed,
        epsilon=args.epsilon,
        max_iterations=args.max_iters,
        n_samples=args.samples,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {"optimize": cmd_optimize, "sweep": cmd_sweep, "validate": cmd_validate}
    try:
        manifest = manifest_from_args(args)
        return commands[args.command](manifest)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"solver backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
