import math
import warnings

import numpy as np
import pytest

from asyncbcd import (DivergenceError, FeasibilityError, Schedule, StopCriteria, available_backends,
                      build_schedule, generate_problem, initial_state, local_stepsizes, manual_plan,
                      monitor_theorem1, residual, run, step)
from asyncbcd.engine import lemma3_margins, read_trace_csv, write_trace_csv
from asyncbcd.stepsize import StepsizeBoundWarning, global_stepsize
from conftest import make_problem
from oracle import scalar_quadratic_steps, sync_projected_gradient


def plan_of(p, gammas):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepsizeBoundWarning)
        return manual_plan(np.asarray(gammas, float), p.lipschitz, p.delays)


def test_scalar_exact_step(scalar_half_square):
    p = scalar_half_square
    s = build_schedule(p.delays, 3, 0)
    st = step(initial_state(p, [1.0]), p, s, plan_of(p, [1.0]))
    assert st.true_x.tolist() == [0.0] and st.t == 1


def test_step_leaves_input_untouched(scalar_half_square):
    p = scalar_half_square
    s = build_schedule(p.delays, 3, 0)
    st0 = initial_state(p, [1.0])
    step(st0, p, s, plan_of(p, [0.5]))
    assert st0.true_x.tolist() == [1.0] and st0.t == 0


def test_fixed_point_invariance():
    # minimiser of 1/2 |x|^2 - x_1 on [0, 2]^2 is (1, 0)
    p = make_problem(np.eye(2), [-1.0, 0.0], 0.0, 2.0, D=[[0, 3], [2, 0]])
    s = build_schedule(p.delays, 30, 2)
    tr = run(p, s, local_stepsizes(p.lipschitz, p.delays), x0=[1.0, 0.0], stop=None)
    assert np.all(tr.step_blocks == 0)
    assert tr.final_x.tolist() == [1.0, 0.0]


def test_horizon_zero_trace():
    p = generate_problem(0, 4, delay_max=3)
    tr = run(p, build_schedule(p.delays, 10, 0), local_stepsizes(p.lipschitz, p.delays), horizon=0)
    assert tr.f.size == 1 and tr.step_blocks.shape == (0, 4)
    assert tr.monitor.passed
    assert monitor_theorem1(tr, np.ones(4)).passed


def test_sync_oracle_small():
    for seed in range(5):
        p = generate_problem(seed, 6, block_sizes=[1, 2, 1, 3, 2, 1], delay_max=0, box_radius=50.0)
        plan = local_stepsizes(p.lipschitz, p.delays)
        tr = run(p, build_schedule(p.delays, 60, seed), plan, stop=None)
        xs = sync_projected_gradient(p.objective.Q, p.objective.r, p.constraint.lower, p.constraint.upper,
                                     p.partition.offsets, plan.gammas.tolist(), [0.0] * p.partition.n, 60)
        assert tr.final_x.tolist() == xs[-1]
        assert tr.f[-1] == p.objective.value(np.array(xs[-1])) or math.isclose(
            tr.f[-1], p.objective.value(np.array(xs[-1])), rel_tol=1e-12)


def test_residual_examples():
    p = make_problem(np.eye(2), [-1.0, 0.0], 0.0, 2.0)
    plan = plan_of(p, [0.5, 0.25])
    blocks, tot = residual(p, [1.0, 0.0], plan=plan)
    assert tot == 0.0 and not blocks.any()
    assert residual(p, [1.0, 0.0], gamma_scaled=False)[1] == 0.0
    # interior point with the projection inactive
    x = np.array([1.5, 0.5])
    g = p.objective.gradient(x)
    blocks, _ = residual(p, x, plan=plan)
    np.testing.assert_allclose(blocks, np.abs(plan.gammas * g), rtol=1e-15)
    with pytest.raises(FeasibilityError):
        residual(p, [3.0, 0.0], plan=plan)


def test_lemma2_relation():
    p = generate_problem(4, 5, block_sizes=[2, 1, 2, 1, 1], box_radius=5.0)
    plan = local_stepsizes(p.lipschitz, p.delays)
    rng = np.random.default_rng(0)
    w = np.maximum(1.0, 1.0 / plan.gammas)
    for _ in range(300):
        x = rng.uniform(-5, 5, p.partition.n)
        sc, _ = residual(p, x, plan=plan)
        _, un = residual(p, x, gamma_scaled=False)
        assert un <= float(w @ sc) * (1 + 1e-12)


def test_lemma3_clamp_case():
    p = make_problem([[1.0]], [0.0], 1.0, np.inf)
    tr = run(p, build_schedule(p.delays, 1, 0), plan_of(p, [1.0]), x0=[1.5], stop=None)
    assert tr.final_x.tolist() == [1.0]
    assert tr.grad_dot[0, 0] == -0.75 and tr.step_sq[0, 0] == 0.25
    assert lemma3_margins(tr)[0, 0] == 0.5


def test_lemma3_inactive_projection_equality_and_no_move(scalar_half_square):
    p = scalar_half_square
    tr = run(p, build_schedule(p.delays, 1, 0), plan_of(p, [0.5]), x0=[1.0], stop=None)
    assert lemma3_margins(tr)[0, 0] == 0.0
    tr = run(p, build_schedule(p.delays, 3, 0), plan_of(p, [0.5]), x0=[0.0], stop=None)
    assert np.all(lemma3_margins(tr) == 0.0)


def test_scalar_divergence_reported():
    L = 10.0
    p = make_problem([[L]], [0.0])
    plan = plan_of(p, [4.0 / L])
    # short horizon: the run completes and reports, it does not abort
    tr = run(p, build_schedule(p.delays, 20, 0), plan, x0=[1.0], stop=None)
    assert tr.stop_reason == "horizon"
    assert tr.monitor.descent_constants[0] < 0
    np.testing.assert_allclose(tr.final_x, scalar_quadratic_steps(L, 4.0 / L, 1.0, 20)[-1], rtol=1e-12)
    # for f = L x^2 / 2 with s = -gamma L x the descent inequality is an identity
    th = tr.monitor.theorem1
    np.testing.assert_allclose(th.lhs, th.rhs, rtol=1e-12)
    with pytest.raises(DivergenceError) as exc:
        run(p, build_schedule(p.delays, 2000, 0), plan, x0=[1.0], stop=None)
    assert exc.value.trace.stop_reason == "diverged"
    assert np.isfinite(exc.value.trace.f).all()
    assert exc.value.trace.monitor is not None


def test_tiny_manual_stepsizes_pass_theorem1():
    p = generate_problem(2, 5, delay_max=4)
    plan = plan_of(p, np.full(5, 1e-5))
    tr = run(p, build_schedule(p.delays, 200, 2), plan)
    assert tr.monitor.theorem1_pass
    assert np.all(np.diff(tr.f) <= 1e-9 * np.abs(tr.f[:-1]))


def test_engine_staleness_assertion_fires():
    p = make_problem(np.array([[1.0, 0.5], [0.5, 1.0]]), [0.3, -0.2], D=[[0, 1], [1, 0]])
    bad = Schedule(8, (np.arange(9), np.arange(9)),
                   {(0, 1): np.array([0, 6]), (1, 0): np.arange(9)}, None, "every-step")
    tr = run(p, bad, local_stepsizes(p.lipschitz, p.delays), stop=None, on_monitor_failure="ignore")
    assert (0, 1, 2) in tr.staleness_violations
    assert not tr.monitor.staleness_pass


@pytest.mark.parametrize("mode", ["every-step", "randomized-updates"])
def test_feasibility_and_monitors(mode):
    p = generate_problem(8, 6, block_sizes=[1, 2, 1, 2, 1, 1], box_radius=20.0, delay_max=5,
                         update_gap_max=3)
    tr = run(p, build_schedule(p.delays, 300, 8, mode), local_stepsizes(p.lipschitz, p.delays),
             stop=StopCriteria(halt=False))
    st = tr.final_state
    assert p.constraint.contains(st.true_x)
    assert all(p.constraint.contains(c) for c in st.local_copies)
    assert tr.monitor.passed and tr.monitor.lemma3.passed


def test_backends_bit_identical(tmp_path):
    backends = available_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    p = generate_problem(5, 10, block_sizes=[1, 2] * 5, delay_max=7, update_gap_max=2)
    s = build_schedule(p.delays, 300, 5, "randomized-updates")
    plan = global_stepsize(p.lipschitz.L_global, p.N, p.delays.B)
    out = []
    for b in backends:
        tr = run(p, s, plan, backend=b)
        out.append(write_trace_csv(tr, tmp_path / f"{b}.csv").read_bytes())
    assert all(o == out[0] for o in out)


def test_determinism_and_csv(tmp_path):
    p = generate_problem(6, 8, delay_max=6)
    s = build_schedule(p.delays, 150, 6)
    plan = local_stepsizes(p.lipschitz, p.delays)
    a = write_trace_csv(run(p, s, plan), tmp_path / "a.csv")
    tr = run(p, s, plan)
    b = write_trace_csv(tr, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    cols = read_trace_csv(a)
    assert cols["f"].tolist() == tr.f.tolist()
    assert list(cols)[:6] == ["t", "f", "step_norm", "residual_total", "residual_unscaled_total",
                              "max_disagreement"]
    assert math.isnan(cols["s_1"][-1])
