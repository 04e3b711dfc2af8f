import math
import warnings

import numpy as np
import pytest

from asyncbcd import (ConfigError, DegenerateAgentError, DelaySpec, StepsizePlan, descent_constants,
                      global_stepsize, local_stepsize, local_stepsizes, manual_plan)
from asyncbcd.objective import BlockLipschitzMatrix
from asyncbcd.stepsize import StepsizeBoundWarning

L2 = BlockLipschitzMatrix(np.array([[2.0, 1.0], [1.0, 3.0]]), 3.618)
SPEC2 = DelaySpec([[0, 1], [2, 0]], None)


def test_single_agent_local():
    plan = local_stepsizes(BlockLipschitzMatrix(np.array([[2.0]]), 2.0), DelaySpec([[0]], None))
    assert math.isclose(plan.gammas[0], 0.95, rel_tol=1e-15)


def test_two_agent_local_by_hand():
    plan = local_stepsizes(L2, SPEC2)
    # agent 1: 2*(1+0+0) + 1*(1+1+2) = 6 ; agent 2: 1*(1+2+1) + 3 = 7
    assert math.isclose(plan.gammas[0], 0.95 * 2 / 6, rel_tol=1e-15)
    assert round(plan.gammas[0], 4) == 0.3167
    assert math.isclose(plan.gammas[1], 0.95 * 2 / 7, rel_tol=1e-15)


@pytest.mark.parametrize("L, N, B, safety, want", [
    (100, 20, 20, 0.95, 0.95 * 2 / (100 * (1 + 2 * math.sqrt(20) * 20))),
    (2, 1, 0, 0.95, 0.95),
    (1, 4, 1, 1.0, 0.4),
])
def test_global(L, N, B, safety, want):
    plan = global_stepsize(L, N, B, safety)
    assert plan.N == N
    assert np.all(plan.gammas == plan.gammas[0])
    assert math.isclose(plan.gammas[0], want, rel_tol=1e-12)


def test_global_reported_scale():
    g = global_stepsize(100, 20, 20, 0.95).gammas[0]
    assert f"{g:.3e}" == "1.056e-04"


def test_descent_constants():
    plan = local_stepsizes(L2, SPEC2)
    C = descent_constants(plan, L2, SPEC2)
    assert math.isclose(C[0], 3 / 0.95 - 3, rel_tol=1e-12)
    assert round(C[0], 4) == 0.1579
    at_bound = local_stepsizes(L2, SPEC2, safety=1.0)
    np.testing.assert_allclose(descent_constants(at_bound, L2, SPEC2), 0.0, atol=1e-15)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepsizeBoundWarning)
        over = manual_plan([1.0, 1.0], L2, SPEC2)
    assert (descent_constants(over, L2, SPEC2) < 0).all()
    assert not over.within_bound


def test_locality_bit_exact(paper_instances):
    for p in paper_instances[:5]:
        L, D = p.lipschitz.L, p.delays.D
        plan = local_stepsizes(p.lipschitz, p.delays)
        for i in range(p.N):
            assert local_stepsize(L[i].copy(), D[i].copy(), D[:, i].copy()) == plan.gammas[i]


def test_dominance_and_envelope(paper_instances):
    for p in paper_instances:
        loc = local_stepsizes(p.lipschitz, p.delays).gammas
        glob = global_stepsize(p.lipschitz.L_global, p.N, p.delays.B).gammas
        assert np.all((loc >= 1e-4) & (loc <= 1e-2))
        assert np.all(loc > glob)
        C = descent_constants(local_stepsizes(p.lipschitz, p.delays), p.lipschitz, p.delays)
        assert np.all(C > 0)


def test_zero_delay_reduction(paper_instances):
    p = paper_instances[0]
    spec = DelaySpec(np.zeros((p.N, p.N), int), None, p.delays.links)
    plan = local_stepsizes(p.lipschitz, spec)
    want = [0.95 * 2 / sum(row.tolist()) for row in p.lipschitz.L]
    np.testing.assert_allclose(plan.gammas, want, rtol=1e-14)


def test_safety_rules_and_degenerate_agents():
    with pytest.raises(ConfigError):
        local_stepsizes(L2, SPEC2, safety=0.0)
    with pytest.raises(ConfigError):
        global_stepsize(100, 20, 20, safety=1.5)
    with pytest.warns(StepsizeBoundWarning):
        global_stepsize(100, 20, 20, safety=1.5, unsafe=True)
    iso = BlockLipschitzMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(DegenerateAgentError):
        local_stepsizes(iso, DelaySpec([[0, 0], [0, 0]], None))
    with pytest.raises(ConfigError):
        StepsizePlan(np.array([0.1, 0.0]), "manual", None, np.array([1.0, 1.0]))
