import numpy as np
import pytest

from aris_opt import cli, rate
from tests.conftest import MINI_CONFIG, TOY_CONFIG


def run_cli(args):
    return cli.main(args)


@pytest.fixture()
def mini_path(tmp_path):
    p = tmp_path / "mini.cfg"
    p.write_text(MINI_CONFIG)
    return p


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_optimize_writes_artifacts(tmp_path, mini_path):
    out = tmp_path / "run"
    code = run_cli([
        "optimize", "--scenario", str(mini_path), "--scheme", "plc",
        "--epsilon", "1e-2", "--max-iters", "5", "--out", str(out),
    ])
    assert code == 0
    for name in ("trajectory.csv", "schedule.csv", "phases.csv", "convergence.csv", "summary.csv",
                 "trajectory.png", "convergence.png"):
        assert (out / name).exists(), name

    header, rows = read_csv(out / "trajectory.csv")
    assert header == ["slot", "x_m", "y_m", "h_m", "psi1_deg", "psi2_deg", "plos1", "plos2"]
    assert len(rows) == 12
    # re-validate the mobility constraints from the CSV alone
    q = np.array([[float(r[1]), float(r[2])] for r in rows])
    h = np.array([float(r[3]) for r in rows])
    assert np.linalg.norm(np.diff(q, axis=0), axis=1).max() <= 40.0 + 1e-6
    assert np.abs(np.diff(h)).max() <= 20.0 + 1e-6
    assert h.min() >= 100 - 1e-6 and h.max() <= 500 + 1e-6

    header, rows = read_csv(out / "convergence.csv")
    etas = [float(r[1]) for r in rows]
    assert all(b >= a - 1e-9 for a, b in zip(etas, etas[1:]))

    header, rows = read_csv(out / "schedule.csv")
    for r in rows:
        a1, a2 = float(r[1]), float(r[2])
        assert a1 in (0.0, 1.0) and a2 in (0.0, 1.0) and a1 + a2 <= 1

    header, rows = read_csv(out / "phases.csv")
    assert len(rows) == 12 * 4
    assert all(0 <= float(r[3]) < 2 * np.pi for r in rows)


def test_optimize_plcfa_altitude_constant(tmp_path, mini_path):
    out = tmp_path / "plcfa"
    assert run_cli([
        "optimize", "--scenario", str(mini_path), "--scheme", "plcfa",
        "--epsilon", "1e-2", "--max-iters", "3", "--out", str(out),
    ]) == 0
    _, rows = read_csv(out / "trajectory.csv")
    assert all(float(r[3]) == 200.0 for r in rows)


def test_missing_scenario_exits_config_error(tmp_path, capsys):
    code = run_cli(["optimize", "--scenario", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert "nope.cfg" in capsys.readouterr().err


def test_bad_values_flag_exits_config_error(tmp_path, mini_path):
    assert run_cli([
        "sweep", "--scenario", str(mini_path), "--sweep", "M", "--values", "a,b",
        "--out", str(tmp_path),
    ]) == cli.EXIT_CONFIG
    assert run_cli([
        "sweep", "--scenario", str(mini_path), "--out", str(tmp_path),
    ]) == cli.EXIT_CONFIG


def test_sweep_outputs_and_byte_stability(tmp_path):
    cfg = tmp_path / "toy.cfg"
    cfg.write_text(TOY_CONFIG)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    args = ["sweep", "--scenario", str(cfg), "--sweep", "M", "--values", "1,4",
            "--epsilon", "1e-2", "--max-iters", "3", "--seed", "5"]
    assert run_cli(args + ["--out", str(out1)]) == 0
    assert run_cli(args + ["--out", str(out2)]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
    assert (out1 / "sweep.png").exists()
    header, rows = read_csv(out1 / "sweep.csv")
    assert header == ["sweep_value", "scheme", "eta_bpshz"]
    assert len(rows) == 6  # 2 values x 3 schemes
    by_scheme = {}
    for value, scheme, eta in rows:
        by_scheme.setdefault(scheme, {})[float(value)] = float(eta)
    assert by_scheme["plc"][4.0] > by_scheme["plc"][1.0]


def test_validate_passes_on_default_mini(tmp_path, mini_path, capsys):
    code = run_cli(["validate", "--scenario", str(mini_path), "--samples", "20000",
                    "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "monte-carlo-z" in out and "PASS" in out and "FAIL" not in out


def test_validate_detects_injected_taylor_fault(tmp_path, mini_path, capsys, monkeypatch):
    # flip the sign of one gradient block: the lower-bound sweep must fail
    original = rate.slack_rate_taylor

    def broken(*args, **kwargs):
        val, dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb = original(*args, **kwargs)
        return val, -dx_k, dx_kb, dy_k, dy_kb, dz_k, dz_kb

    monkeypatch.setattr(rate, "slack_rate_taylor", broken)
    code = run_cli(["validate", "--scenario", str(mini_path), "--samples", "1000",
                    "--out", str(tmp_path)])
    assert code == cli.EXIT_VALIDATION
    assert "taylor-lower-bound" in capsys.readouterr().out


def test_validate_small_sample_override(tmp_path, mini_path, capsys):
    code = run_cli(["validate", "--scenario", str(mini_path), "--samples", "1000",
                    "--out", str(tmp_path)])
    assert code == 0
    assert "n=1000" in capsys.readouterr().out
