import numpy as np
import pytest

from asyncbcd import (ConfigError, DelaySpec, Schedule, build_schedule, generate_problem, staleness,
                      validate_partial_asynchrony)


def full_spec(N, d, g=0):
    D = np.full((N, N), d)
    np.fill_diagonal(D, 0)
    return DelaySpec(D, np.full(N, g))


def test_zero_delay_arrives_every_step():
    s = build_schedule(full_spec(4, 0), 50, seed=1)
    for ts in s.arrivals.values():
        assert ts.tolist() == list(range(51))
    assert all(staleness(s, 0, 1, t) == t for t in range(51))


def test_single_agent():
    spec = DelaySpec([[0]], None)
    s = build_schedule(spec, 30, seed=5)
    assert s.arrivals == {}
    assert s.updates[0].tolist() == list(range(31))
    assert validate_partial_asynchrony(s, spec)


def test_gap_bounds_for_max_delay():
    spec = DelaySpec([[0, 20], [20, 0]], None)
    s = build_schedule(spec, 500, seed=9)
    ts = s.arrivals[(0, 1)]
    assert ts[0] == 0
    gaps = np.diff(ts)
    assert gaps.min() >= 1 and gaps.max() <= 21
    assert len(set(gaps.tolist())) > 5


def test_staleness_between_arrivals_and_own_block():
    s = Schedule(12, (np.arange(13), np.arange(13)),
                 {(0, 1): np.array([0, 5, 9]), (1, 0): np.arange(13)}, None, "every-step")
    assert staleness(s, 0, 1, 7) == 5
    assert staleness(s, 0, 1, 9) == 9
    assert staleness(s, 0, 0, 7) == 7
    assert staleness(s, 1, 0, 4) == 4


def test_forced_violation_detected():
    spec = DelaySpec([[0, 2], [2, 0]], None)
    # link 1 -> 0 silent from t=0 until t=5 (D + 2 = 4 steps without an arrival before updates at 3, 4)
    s = Schedule(6, (np.arange(7), np.arange(7)),
                 {(0, 1): np.array([0, 5]), (1, 0): np.arange(7)}, None, "every-step")
    v = validate_partial_asynchrony(s, spec)
    assert not v
    assert ("delay", 0, 1, 3) in v.violations and ("delay", 0, 1, 4) in v.violations
    assert all(x[1] == 0 for x in v.violations)


def test_update_gap_violation_detected():
    spec = DelaySpec([[0]], [1])
    s = Schedule(6, (np.array([0, 1, 4, 5, 6]),), {}, None, "randomized-updates")
    v = validate_partial_asynchrony(s, spec)
    assert v.violations == [("update-gap", 0, None, 2)]


@pytest.mark.parametrize("mode", ["every-step", "randomized-updates"])
def test_generated_schedules_valid(mode):
    for seed in range(100):
        p = generate_problem(seed, 6, delay_max=seed % 7, update_gap_max=seed % 4)
        s = build_schedule(p.delays, 120, seed, mode)
        v = validate_partial_asynchrony(s, p.delays)
        assert v, v.violations[:5]


def test_staleness_monotone_and_bounded():
    p = generate_problem(3, 5, delay_max=6)
    s = build_schedule(p.delays, 80, 3)
    for (i, j) in s.arrivals:
        taus = [staleness(s, i, j, t) for t in range(81)]
        assert all(a <= b for a, b in zip(taus, taus[1:]))
        assert all(tau <= t for t, tau in enumerate(taus))


def test_unlinked_pairs_never_communicate():
    L = np.array([[0, 3, 0], [3, 0, 0], [0, 0, 0]])
    spec = DelaySpec(L, None, links=L > 0)
    s = build_schedule(spec, 20, 0)
    assert set(s.arrivals) == {(0, 1), (1, 0)}
    with pytest.raises(ConfigError):
        DelaySpec([[0, 1], [0, 0]], None, links=[[False, False], [True, False]])


def test_determinism_and_seed_sensitivity():
    spec = full_spec(5, 8, 2)
    a = build_schedule(spec, 200, 42, "randomized-updates")
    b = build_schedule(spec, 200, 42, "randomized-updates")
    assert a.digest() == b.digest()
    assert build_schedule(spec, 200, 43, "randomized-updates").digest() != a.digest()
    assert Schedule.from_dict(a.to_dict()).digest() == a.digest()


def test_delay_spec_validation():
    with pytest.raises(ConfigError):
        DelaySpec([[1]], None)
    with pytest.raises(ConfigError):
        DelaySpec([[0, -1], [0, 0]], None)
    with pytest.raises(ConfigError):
        build_schedule(full_spec(2, 1), 0, 1)
    with pytest.raises(ConfigError):
        build_schedule(full_spec(2, 1), 10, 1, mode="bogus")
