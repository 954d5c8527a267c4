import numpy as np
import pytest

from aris_opt.channel import compute_channel_grid, scenario_fading
from aris_opt.errors import BudgetExceeded
from aris_opt.phase_opt import (
    brute_force_phases,
    coordinate_ascent_phases,
    gaussian_randomization,
    phase_objective,
    sdr_objective,
    slot_phase_inputs,
    solve_phase_sdr,
)
from aris_opt.rate import build_gain_matrix, expected_rate
from aris_opt.scenario import initial_trajectory


def ll_only_instance(rng, m, gamma=2.0):
    h_rx = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    h_tx = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    gains = np.zeros((4, m, m), dtype=complex)
    gains[0] = gamma * build_gain_matrix(h_rx, h_tx)
    probs = np.array([1.0, 0.0, 0.0, 0.0])
    closed = np.log2(1 + gamma * np.sum(np.abs(np.conj(h_rx) * h_tx)) ** 2)
    return gains, probs, closed


def mixed_instance(rng, m):
    gains = np.stack(
        [
            0.5 * build_gain_matrix(
                rng.standard_normal(m) + 1j * rng.standard_normal(m),
                rng.standard_normal(m) + 1j * rng.standard_normal(m),
            )
            for _ in range(4)
        ]
    )
    probs = rng.dirichlet(np.ones(4))
    return gains, probs


def test_sdr_objective_consistency(mini_scenario, rng):
    s = mini_scenario
    grid = compute_channel_grid(s, initial_trajectory(s), scenario_fading(s))
    slot = grid.slot(3)
    gains, probs = slot_phase_inputs(slot, 0, s.gamma(1))
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, s.ris.n_elements))
    lifted = np.outer(v, np.conj(v))
    direct = expected_rate(slot, 0, v, s.gamma(1)).expected
    assert sdr_objective(lifted, gains, probs) == pytest.approx(direct, rel=1e-10)
    assert phase_objective(v, gains, probs) == pytest.approx(direct, rel=1e-10)
    assert sdr_objective(np.eye(1), np.zeros((4, 1, 1)), probs) == 0.0
    with pytest.raises(ValueError, match="negative trace"):
        sdr_objective(-np.eye(2), np.stack([np.eye(2)] * 4), probs)


def test_coordinate_ascent_reaches_alignment(rng):
    gains, probs, closed = ll_only_instance(rng, 5)
    v, value = coordinate_ascent_phases(np.ones(5, dtype=complex), gains, probs)
    assert value == pytest.approx(closed, abs=1e-6)
    assert np.allclose(np.abs(v), 1.0, atol=1e-12)


def test_coordinate_ascent_fixed_point(rng):
    gains, probs, closed = ll_only_instance(rng, 4)
    v_star, value = coordinate_ascent_phases(np.ones(4, dtype=complex), gains, probs)
    again, value2 = coordinate_ascent_phases(v_star, gains, probs, max_sweeps=1)
    assert value2 >= value - 1e-12
    assert value2 == pytest.approx(value, abs=1e-9)


def test_coordinate_ascent_monotone_from_random_starts(rng):
    gains, probs = mixed_instance(rng, 3)
    for _ in range(5):
        v0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
        start = phase_objective(v0, gains, probs)
        _, value = coordinate_ascent_phases(v0, gains, probs)
        assert value >= start - 1e-12


def test_sdr_upper_bounds_and_m1_trivial(rng):
    gains, probs, closed = ll_only_instance(rng, 2)
    lifted = solve_phase_sdr(gains, probs)
    assert lifted.objective >= closed - 1e-6
    assert np.allclose(np.diagonal(lifted.matrix), 1.0, atol=1e-6)
    single = solve_phase_sdr(*ll_only_instance(rng, 1)[:2])
    assert single.matrix.shape == (1, 1)


def test_gaussian_randomization_rank_one_exact(rng):
    gains, probs, _ = ll_only_instance(rng, 4)
    v_star, value = coordinate_ascent_phases(np.ones(4, dtype=complex), gains, probs)
    v, recovered = gaussian_randomization(np.outer(v_star, np.conj(v_star)), gains, probs, n_draws=3, seed=0)
    assert recovered == pytest.approx(value, abs=1e-9)
    assert np.allclose(np.abs(v), 1.0)


def test_gaussian_randomization_deterministic(rng):
    gains, probs = mixed_instance(rng, 3)
    lifted = solve_phase_sdr(gains, probs)
    a = gaussian_randomization(lifted.matrix, gains, probs, n_draws=1, seed=11)
    b = gaussian_randomization(lifted.matrix, gains, probs, n_draws=1, seed=11)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_gaussian_randomization_near_bound_ll(rng):
    gains, probs, _ = ll_only_instance(rng, 2)
    lifted = solve_phase_sdr(gains, probs)
    _, value = gaussian_randomization(lifted.matrix, gains, probs, n_draws=200, seed=5)
    assert value >= 0.98 * lifted.objective


def test_brute_force_budget_and_alignment(rng):
    gains, probs, closed = ll_only_instance(rng, 2)
    _, best = brute_force_phases(gains, probs, levels=64)
    # grid resolution bound: relative SNR gap <= (pi / levels)^2
    assert best >= closed - np.log2(1 + (np.pi / 64) ** 2) - 1e-9
    assert best <= closed + 1e-9
    with pytest.raises(BudgetExceeded):
        brute_force_phases(np.zeros((4, 10, 10)), probs, levels=16)


def test_relaxation_ordering_chain(rng):
    for _ in range(5):
        gains, probs = mixed_instance(rng, 3)
        _, bf = brute_force_phases(gains, probs, levels=16)
        _, ca = coordinate_ascent_phases(np.ones(3, dtype=complex), gains, probs)
        lifted = solve_phase_sdr(gains, probs)
        slack = 10 * lifted.tolerance
        assert bf <= ca * 1.01 + 1e-9
        assert ca <= lifted.objective + slack
        _, gr = gaussian_randomization(lifted.matrix, gains, probs, n_draws=100, seed=3)
        assert gr <= lifted.objective + slack
