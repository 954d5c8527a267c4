import numpy as np
import pytest

from aris_opt.channel import compute_channel_grid, scenario_fading
from aris_opt.rate import (
    PhasePlan,
    XiCoefficients,
    build_gain_matrix,
    cascaded_gain,
    conditional_rate,
    expected_rate,
    expected_rates_matrix,
    identity_phases,
    frozen_direction_rates,
    joint_state_probs,
    rate_in_slacks,
    slack_rate,
    slack_rate_taylor,
    taylor_rate_lower_bound,
    xi_coefficients,
    xi_grid,
)
from aris_opt.scenario import initial_trajectory


def cplx(rng, m):
    return rng.standard_normal(m) + 1j * rng.standard_normal(m)


def test_cascaded_gain_examples():
    ones = np.ones(2, dtype=complex)
    assert cascaded_gain(ones, ones, ones) == pytest.approx(4.0)
    assert cascaded_gain(ones, ones, np.array([1.0, -1.0], dtype=complex)) == pytest.approx(0.0)
    with pytest.raises(ValueError, match="length mismatch"):
        cascaded_gain(ones, ones, np.ones(3, dtype=complex))


def test_cascaded_gain_matches_trace_form(rng):
    for _ in range(100):
        h_rx, h_tx, v = cplx(rng, 4), cplx(rng, 4), np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        g = build_gain_matrix(h_rx, h_tx)
        direct = cascaded_gain(h_rx, v, h_tx)
        lifted = np.trace(np.outer(v, np.conj(v)) @ g).real
        assert lifted == pytest.approx(direct, abs=1e-10 * max(1.0, direct))


def test_gain_matrix_structure(rng):
    ones = np.ones(2, dtype=complex)
    assert np.allclose(build_gain_matrix(ones, ones), np.ones((2, 2)))
    for _ in range(20):
        g = build_gain_matrix(cplx(rng, 5), cplx(rng, 5))
        assert np.allclose(g, g.conj().T)
        eig = np.linalg.eigvalsh(g)
        assert eig.min() >= -1e-12
        assert np.sum(eig > 1e-9 * eig.max()) == 1  # rank one


def test_conditional_rate_examples():
    assert conditional_rate(0.0, 5.0) == 0.0
    assert conditional_rate(0.5, 2.0) == pytest.approx(1.0)
    assert conditional_rate(3.0, 1.0) == pytest.approx(2.0)


def test_global_phase_invariance(rng):
    h_rx, h_tx = cplx(rng, 6), cplx(rng, 6)
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    shifted = v * np.exp(1j * 1.234)
    assert cascaded_gain(h_rx, shifted, h_tx) == pytest.approx(cascaded_gain(h_rx, v, h_tx))


def test_alignment_gain_is_triangle_equality(rng):
    # phase-conjugate alignment drives the LoS-LoS gain to (sum |g_m|)^2
    h_rx, h_tx = cplx(rng, 5), cplx(rng, 5)
    c = np.conj(h_rx) * h_tx
    v = np.exp(-1j * np.angle(c))
    assert cascaded_gain(h_rx, v, h_tx) == pytest.approx(np.sum(np.abs(c)) ** 2, rel=1e-12)


def test_expected_rate_degenerate_and_bounds(mini_scenario, rng):
    s = mini_scenario
    traj = initial_trajectory(s)
    fading = scenario_fading(s)
    grid = compute_channel_grid(s, traj, fading)
    slot = grid.slot(4)
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, s.ris.n_elements))
    terms = expected_rate(slot, 0, v, s.gamma(1))
    assert terms.probs().sum() == pytest.approx(1.0)
    rates = terms.rates()
    assert rates.min() - 1e-12 <= terms.expected <= rates.max() + 1e-12
    assert terms.expected == pytest.approx(float(np.dot(terms.probs(), rates)))
    # forcing LoS on both links reduces the mixture to the LL rate
    forced = type(slot)(
        distance=slot.distance, elevation_deg=slot.elevation_deg,
        p_los=np.array([1.0, 1.0]), los=slot.los, nlos=slot.nlos,
    )
    t2 = expected_rate(forced, 0, v, s.gamma(1))
    assert t2.expected == pytest.approx(t2.r_ll)
    # all-equal conditional rates collapse to that common value
    eq = type(slot)(
        distance=slot.distance, elevation_deg=slot.elevation_deg,
        p_los=slot.p_los, los=slot.los, nlos=np.stack([slot.los[0], slot.los[1]]),
    )
    t3 = expected_rate(eq, 1, v, s.gamma(0))
    assert t3.expected == pytest.approx(t3.r_ll)


def test_expected_rates_matrix_matches_slotwise(mini_scenario, rng):
    s = mini_scenario
    traj = initial_trajectory(s)
    fading = scenario_fading(s)
    grid = compute_channel_grid(s, traj, fading)
    plan = PhasePlan(np.exp(1j * rng.uniform(0, 2 * np.pi, (s.n_slots, s.ris.n_elements))))
    powers = np.array([n.transmit_power for n in s.nodes])
    mat = expected_rates_matrix(grid, plan, powers, s.env.noise_power)
    for n in (0, 3, 11):
        slot = grid.slot(n)
        for k in (0, 1):
            direct = expected_rate(slot, k, plan.coefficients[n], s.gamma(1 - k)).expected
            assert mat[n, k] == pytest.approx(direct, rel=1e-12)
    forced = expected_rates_matrix(grid, plan, powers, s.env.noise_power, los_forced=True)
    slot = grid.slot(7)
    assert forced[7, 0] == pytest.approx(expected_rate(slot, 0, plan.coefficients[7], s.gamma(1)).r_ll)


def test_phase_plan_rejects_non_unit_modulus():
    with pytest.raises(ValueError, match="unit modulus"):
        PhasePlan(np.full((2, 2), 0.5 + 0j))
    assert identity_phases(3, 4).coefficients.shape == (3, 4)


def test_xi_definition_matches_rate_at_expansion(mini_scenario, rng):
    # with distances normalized out, the frozen coefficients must reproduce
    # the four conditional SNRs exactly at the expansion trajectory
    s = mini_scenario
    traj = initial_trajectory(s)
    fading = scenario_fading(s)
    grid = compute_channel_grid(s, traj, fading)
    plan = PhasePlan(np.exp(1j * rng.uniform(0, 2 * np.pi, (s.n_slots, s.ris.n_elements))))
    powers = np.array([n.transmit_power for n in s.nodes])
    xi = xi_grid(grid, plan, powers, s.env.beta0, s.env.noise_power)
    rates = frozen_direction_rates(xi, grid.distance, grid.p_los, s.env.alpha_los, s.env.alpha_nlos)
    direct = expected_rates_matrix(grid, plan, powers, s.env.noise_power)
    assert np.allclose(rates, direct, rtol=1e-10)
    # scalar builder agrees with the vectorized one
    n, k = 6, 1
    single = xi_coefficients(
        grid.steering[n, k], grid.steering[n, 0], fading[k], fading[0],
        plan.coefficients[n], powers[0], s.env.beta0, s.env.noise_power,
    )
    assert np.allclose(single.as_array(), xi[n, k])


def random_slack_instance(rng):
    xi4 = rng.uniform(0, 1e12, 4)
    x = rng.uniform(1.0, 13.0, 2)
    y = rng.uniform(1e4, 2.6e6, 2)
    z = rng.uniform(1.0, 5000.0, 2)
    return xi4, x, y, z


def test_rate_in_slacks_examples(rng):
    xi = XiCoefficients(0.0, 0.0, 0.0, 0.0)
    assert rate_in_slacks(np.ones(2), np.full(2, 1e4), np.ones(2), xi, 0, 2.2, 3.2) == 0.0
    # doubling y_k with alpha_L = 2 halves the LL SNR argument
    xi = XiCoefficients(1e10, 0.0, 0.0, 0.0)
    x, z = np.ones(2), np.ones(2)
    y = np.array([1e4, 1e4])
    base = rate_in_slacks(x, y, z, xi, 0, 2.0, 3.2)
    doubled = rate_in_slacks(x, y * [2, 1], z, xi, 0, 2.0, 3.2)
    assert 2 ** doubled - 1 == pytest.approx((2 ** base - 1) / 2)


def test_rate_in_slacks_decreasing(rng):
    for _ in range(50):
        xi4, x, y, z = random_slack_instance(rng)
        base = slack_rate(x[0], x[1], y[0], y[1], z[0], z[1], xi4, 2.2, 3.2)
        for idx in range(6):
            args = [x[0], x[1], y[0], y[1], z[0], z[1]]
            args[idx] *= 1.3
            assert slack_rate(*args, xi4, 2.2, 3.2) <= base + 1e-12


def test_taylor_equality_and_gradient_at_expansion(rng):
    for _ in range(30):
        xi4, x, y, z = random_slack_instance(rng)
        args = (x[0], x[1], y[0], y[1], z[0], z[1])
        val, *grads = slack_rate_taylor(*args, xi4, 2.2, 3.2)
        assert val == pytest.approx(slack_rate(*args, xi4, 2.2, 3.2), rel=1e-12)
        for i, g in enumerate(grads):
            h = 1e-4 * args[i]
            hi = list(args)
            lo = list(args)
            hi[i] += h
            lo[i] -= h
            fd = (slack_rate(*hi, xi4, 2.2, 3.2) - slack_rate(*lo, xi4, 2.2, 3.2)) / (2 * h)
            assert g == pytest.approx(fd, rel=1e-5, abs=1e-14)


def test_taylor_is_global_lower_bound(rng):
    for _ in range(100):
        xi4, x0, y0, z0 = random_slack_instance(rng)
        xi = XiCoefficients(*xi4)
        for _ in range(10):
            x1 = np.maximum(x0 * rng.uniform(0.3, 3.0, 2), 1.0)
            y1 = y0 * rng.uniform(0.3, 3.0, 2)
            z1 = np.maximum(z0 * rng.uniform(0.3, 3.0, 2), 1.0)
            bound = taylor_rate_lower_bound(x1, y1, z1, x0, y0, z0, xi, 0, 2.2, 3.2)
            true = rate_in_slacks(x1, y1, z1, xi, 0, 2.2, 3.2)
            assert bound <= true + 1e-9


def test_joint_state_probs_sum_to_one(rng):
    p = joint_state_probs(rng.uniform(0, 1, 7), rng.uniform(0, 1, 7))
    assert np.allclose(p.sum(axis=-1), 1.0)
