import numpy as np
import pytest

from aris_opt.scheduling import (
    Schedule,
    min_average_rate,
    reconstruct_binary,
    solve_schedule_lp,
)
from aris_opt.validator import best_binary_schedule, schedule_threshold_oracle


def test_two_slot_specialists():
    s = solve_schedule_lp(np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert s.eta == pytest.approx(1.0)
    assert np.allclose(s.alpha, [[1, 0], [0, 1]])


def test_single_slot_even_split():
    # max min(4 a1, 4 a2) with a1 + a2 <= 1 peaks at the even split
    s = solve_schedule_lp(np.array([[4.0, 4.0]]))
    assert s.eta == pytest.approx(2.0)
    assert s.alpha.sum() == pytest.approx(1.0)


def test_all_zero_rates():
    s = solve_schedule_lp(np.zeros((4, 2)))
    assert s.eta == 0.0


def test_lp_matches_threshold_oracle(rng):
    for _ in range(80):
        n = int(rng.integers(1, 13))
        rates = rng.uniform(0, 5, (n, 2))
        if rng.random() < 0.25:
            rates[:, int(rng.integers(2))] *= 0.01
        if rng.random() < 0.1:
            rates[rng.random(n) < 0.3] = 0.0
        lp = solve_schedule_lp(rates)
        assert lp.eta == pytest.approx(schedule_threshold_oracle(rates), abs=1e-6)
        # the returned shares must actually achieve the reported optimum
        assert min_average_rate(lp.alpha, rates) == pytest.approx(lp.eta, abs=1e-8)


def test_lp_monotone_in_rates(rng):
    rates = rng.uniform(0, 5, (6, 2))
    base = solve_schedule_lp(rates).eta
    for _ in range(20):
        bumped = rates.copy()
        bumped[rng.integers(6), rng.integers(2)] += rng.uniform(0, 2)
        assert solve_schedule_lp(bumped).eta >= base - 1e-9


def test_symmetric_rates_value():
    rng = np.random.default_rng(7)
    col = rng.uniform(0, 3, 9)
    rates = np.column_stack([col, col])
    s = solve_schedule_lp(rates)
    assert s.eta == pytest.approx(col.sum() / (2 * 9), abs=1e-9)


def test_reconstruct_binary_idempotent():
    rates = np.ones((2, 2))
    binary = Schedule(alpha=np.array([[1.0, 0.0], [0.0, 1.0]]), eta=0.5)
    out = reconstruct_binary(binary, rates)
    assert np.array_equal(out.alpha, binary.alpha)
    assert out.kappa == pytest.approx(0.0)


def test_reconstruct_binary_even_example():
    rates = np.ones((2, 2))
    relaxed = Schedule(alpha=np.array([[0.6, 0.4], [0.4, 0.6]]), eta=0.5)
    out = reconstruct_binary(relaxed, rates)
    assert set(map(tuple, out.alpha)) == {(1.0, 0.0), (0.0, 1.0)}
    assert out.eta == pytest.approx(0.5)
    assert out.kappa == pytest.approx(0.0)


def test_reconstruction_matches_exhaustive(rng):
    for _ in range(60):
        n = int(rng.integers(2, 9))
        rates = rng.uniform(0, 5, (n, 2))
        relaxed = solve_schedule_lp(rates)
        rebuilt = reconstruct_binary(relaxed, rates)
        assert rebuilt.is_binary()
        assert (rebuilt.alpha.sum(axis=1) <= 1 + 1e-12).all()
        _, best_eta = best_binary_schedule(rates)
        assert rebuilt.eta == pytest.approx(best_eta, abs=1e-9)
        assert rebuilt.eta >= (1 - rebuilt.kappa) * relaxed.eta - 1e-9


def test_reconstruction_deterministic(rng):
    rates = rng.uniform(0, 5, (30, 2))
    relaxed = solve_schedule_lp(rates)
    a = reconstruct_binary(relaxed, rates)
    b = reconstruct_binary(relaxed, rates)
    assert np.array_equal(a.alpha, b.alpha) and a.eta == b.eta


def test_schedule_invariants_enforced():
    with pytest.raises(ValueError, match="sum to at most 1"):
        Schedule(alpha=np.array([[0.7, 0.7]]), eta=0.0)
    with pytest.raises(ValueError, match="lie in"):
        Schedule(alpha=np.array([[1.4, -0.4]]), eta=0.0)
