"""Partially asynchronous block coordinate descent on a simulated clock.

One timestep ``t -> t+1`` first lets every agent with ``t in T^i`` take a
projected gradient step computed from its own (possibly stale) copy
``x_i(t)``, and only then applies the deliveries scheduled for ``t+1``.
Updates therefore never see information from their own timestep.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .asynchrony import Schedule
from .blockvec import BlockVector
from .errors import AsyncBCDError, ConfigError, DivergenceError, FeasibilityError
from .kernels import get_backend
from .objective import Problem, QuadraticObjective
from .stepsize import StepsizePlan, descent_constants

EPS = np.finfo(np.float64).eps
THEOREM1_RTOL = 1e-9
LEMMA3_ATOL = 1e-9


class MonitorWarning(UserWarning):
    """A descent monitor failed on a run whose stepsizes exceed the bound."""


class MonitorError(AsyncBCDError):
    """A descent monitor failed although every stepsize was within its bound."""

    def __init__(self, report, trace=None):
        self.report = report
        self.trace = trace
        super().__init__(f"monitor failure: {', '.join(report.failures())}")


@dataclass(frozen=True)
class StopCriteria:
    """When to end a run before the horizon.

    The network is declared stationary at ``t`` when the unscaled residual
    ``|x - P[x - grad f(x)]|`` and ``max_i |x - x_i|`` are both at most
    ``tol``, or when no agent has moved during the last
    ``max_i max(G_i, max_j D^j_i) + 1`` steps.  With ``halt=False`` the time
    is recorded but the run continues to the horizon.
    """

    tol: float = 1e-8
    halt: bool = True


@dataclass
class NetworkState:
    """True state ``x(t)``, agents' copies ``x_i(t)`` and their timestamps.

    ``stale_stamps[i, j]`` is the time at which agent ``i``'s copy of block
    ``j`` was taken from the true state.
    """

    t: int
    true_x: np.ndarray
    local_copies: np.ndarray
    stale_stamps: np.ndarray
    partition: object

    def true_state(self) -> BlockVector:
        return BlockVector(self.true_x, self.partition)

    def local_copy(self, i: int) -> BlockVector:
        return BlockVector(self.local_copies[i], self.partition)

    def copy(self) -> "NetworkState":
        return NetworkState(self.t, self.true_x.copy(), self.local_copies.copy(),
                            self.stale_stamps.copy(), self.partition)


def initial_state(problem: Problem, x0=None) -> NetworkState:
    """Every agent starts from the same feasible point (default 0, projected)."""
    part = problem.partition
    if x0 is None:
        x = problem.constraint.project(np.zeros(part.n))
    else:
        x = np.array(x0.data if isinstance(x0, BlockVector) else x0, dtype=np.float64)
        part.check_length(x)
        if not problem.constraint.contains(x):
            raise FeasibilityError("initial point lies outside the constraint set")
    copies = np.ascontiguousarray(np.broadcast_to(x, (part.N, part.n)), dtype=np.float64).copy()
    stamps = np.zeros((part.N, part.N), dtype=np.int64)
    return NetworkState(0, x.copy(), copies, stamps, part)


@dataclass
class StepRecord:
    """What happened during one timestep."""

    steps: np.ndarray
    active: np.ndarray
    grad_dot: np.ndarray
    step_sq: np.ndarray
    grad_scale: np.ndarray
    staleness_violations: list


class _Context:
    """Contiguous arrays and scratch buffers shared by every step of a run."""

    def __init__(self, problem: Problem, sched: Schedule, plan: StepsizePlan, backend):
        if not isinstance(problem.objective, QuadraticObjective):
            raise TypeError("the simulation engine only supports quadratic objectives")
        if sched.N != problem.N or plan.N != problem.N:
            raise ConfigError(f"problem has {problem.N} agents, schedule {sched.N}, plan {plan.N}")
        self.k = get_backend(backend)
        self.backend = backend
        self.Q = np.ascontiguousarray(problem.objective.Q)
        self.r = np.ascontiguousarray(problem.objective.r)
        self.lower = np.ascontiguousarray(problem.constraint.lower)
        self.upper = np.ascontiguousarray(problem.constraint.upper)
        self.offsets = problem.partition.offsets_array()
        self.gammas = np.ascontiguousarray(plan.gammas)
        self.ones = np.ones(problem.N)
        self.D = problem.delays.D
        self.links = problem.delays.links
        self.update_mask = sched.update_mask
        self.arrival_mask = sched.arrival_mask
        self.horizon = sched.horizon
        n, N = problem.partition.n, problem.N
        self.grad = np.empty(n)
        self.res_s = np.empty(N)
        self.res_u = np.empty(N)

    def evaluate(self, x):
        f = self.k.quad_eval(self.Q, self.r, x, self.grad)
        self.k.residual_sq(x, self.grad, self.lower, self.upper, self.offsets, self.gammas, self.res_s, self.res_u)
        return f


def _advance(state: NetworkState, ctx: _Context) -> StepRecord:
    t = state.t
    if t >= ctx.horizon:
        raise ConfigError(f"cannot step past the schedule horizon {ctx.horizon}")
    N, n = state.local_copies.shape
    active = ctx.update_mask[t]
    # independent re-check of the staleness bound at every update
    late = (t - state.stale_stamps > ctx.D) & ctx.links & active.astype(bool)[:, None]
    violations = [(int(i), int(j), t) for i, j in zip(*np.nonzero(late))]
    steps = np.empty(n)
    grad_dot = np.empty(N)
    step_sq = np.empty(N)
    grad_scale = np.empty(N)
    ctx.k.agent_updates(ctx.Q, ctx.r, ctx.lower, ctx.upper, ctx.offsets, ctx.gammas, state.local_copies,
                        state.true_x, active, steps, grad_dot, step_sq, grad_scale)
    ctx.k.deliver(state.local_copies, state.true_x, ctx.offsets, ctx.arrival_mask[t + 1], state.stale_stamps, t + 1)
    state.t = t + 1
    return StepRecord(steps, active.astype(bool), grad_dot, step_sq, grad_scale, violations)


def step(state: NetworkState, problem: Problem, sched: Schedule, plan: StepsizePlan,
         backend: str | None = None) -> NetworkState:
    """Return the network state at ``t+1``; ``state`` is left untouched."""
    new = state.copy()
    _advance(new, _Context(problem, sched, plan, backend))
    return new


def residual(problem: Problem, x, gamma_scaled: bool = True, plan: StepsizePlan | None = None,
             backend: str | None = None):
    """Per-block norms and Euclidean total of the projected-gradient residual.

    With ``gamma_scaled`` the blocks are ``P_i[x_i - gamma_i grad_i f(x)] - x_i``
    (``plan`` required); otherwise ``gamma_i = 1``, which measures distance
    from the stationarity condition ``x = P[x - grad f(x)]``.
    """
    x = np.array(x.data if isinstance(x, BlockVector) else x, dtype=np.float64)
    problem.partition.check_length(x)
    if not problem.constraint.contains(x):
        raise FeasibilityError("residual requested at an infeasible point")
    if gamma_scaled and plan is None:
        raise ConfigError("the scaled residual needs a stepsize plan")
    k = get_backend(backend)
    gammas = plan.gammas if gamma_scaled else np.ones(problem.N)
    grad = np.empty_like(x)
    k.quad_eval(problem.objective.Q, problem.objective.r, x, grad)
    sc, un = np.empty(problem.N), np.empty(problem.N)
    k.residual_sq(x, grad, problem.constraint.lower, problem.constraint.upper,
                  problem.partition.offsets_array(), np.ascontiguousarray(gammas, dtype=np.float64), sc, un)
    sq = sc if gamma_scaled else un
    return np.sqrt(sq), math.sqrt(float(np.sum(sq)))


@dataclass
class RunTrace:
    """Per-timestep series of one run; entry ``t`` describes ``x(t)``.

    Step series have one entry fewer than state series: ``step_blocks[t]``
    holds ``|s^{[i]}(t)|`` with ``s(t) = x(t+1) - x(t)``.
    """

    f: np.ndarray
    step_blocks: np.ndarray
    residual_blocks: np.ndarray
    residual_unscaled_blocks: np.ndarray
    disagreement: np.ndarray
    grad_dot: np.ndarray
    step_sq: np.ndarray
    grad_scale: np.ndarray
    active: np.ndarray
    staleness_violations: list
    final_state: NetworkState
    plan: StepsizePlan
    block_sizes: tuple
    horizon: int
    stop_reason: str
    stationary_time: int | None
    problem_digest: str
    schedule_digest: str
    schedule_seed: int | None
    backend: str
    monitor: "MonitorReport | None" = None

    @property
    def stop_time(self) -> int:
        return self.f.size - 1

    @property
    def step_norm(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.sqrt(np.sum(self.step_blocks ** 2, axis=1))

    @property
    def residual_total(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.sqrt(np.sum(self.residual_blocks ** 2, axis=1))

    @property
    def residual_unscaled_total(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.sqrt(np.sum(self.residual_unscaled_blocks ** 2, axis=1))

    @property
    def final_x(self) -> np.ndarray:
        return self.final_state.true_x

    def first_time_below(self, threshold: float, series: str = "residual_unscaled_total") -> int | None:
        hits = np.flatnonzero(getattr(self, series) <= threshold)
        return int(hits[0]) if hits.size else None

    def metadata(self) -> dict:
        return {
            "problem_digest": self.problem_digest,
            "schedule_digest": self.schedule_digest,
            "schedule_seed": self.schedule_seed,
            "plan": self.plan.to_dict(),
            "horizon": self.horizon,
            "stop_reason": self.stop_reason,
            "stop_time": self.stop_time,
            "stationary_time": self.stationary_time,
        }


def run(problem: Problem, sched: Schedule, plan: StepsizePlan, horizon: int | None = None,
        stop: StopCriteria | None = StopCriteria(), x0=None, monitors: bool = True,
        on_monitor_failure: str = "auto", backend: str | None = None) -> RunTrace:
    """Simulate from ``x_i(0) = x0`` (default 0) until the horizon or a stop.

    Raises :class:`DivergenceError` when the objective or gradient stops
    being finite; the partial trace is attached as ``exc.trace``.

    Monitor failures raise :class:`MonitorError` when the plan respects its
    stepsize bound and only warn otherwise (``on_monitor_failure="auto"``);
    ``"raise"``, ``"warn"`` and ``"ignore"`` force one behaviour.
    """
    H = sched.horizon if horizon is None else int(horizon)
    if not 0 <= H <= sched.horizon:
        raise ConfigError(f"horizon {H} outside schedule range 0..{sched.horizon}")
    if on_monitor_failure not in ("auto", "raise", "warn", "ignore"):
        raise ConfigError(f"bad on_monitor_failure {on_monitor_failure!r}")
    ctx = _Context(problem, sched, plan, backend)
    state = initial_state(problem, x0)
    N = problem.N
    window = problem.delays.window()

    f = np.empty(H + 1)
    res_s = np.empty((H + 1, N))
    res_u = np.empty((H + 1, N))
    dis = np.empty(H + 1)
    step_blocks = np.empty((H, N))
    grad_dot = np.empty((H, N))
    step_sq = np.empty((H, N))
    grad_scale = np.empty((H, N))
    active = np.zeros((H, N), dtype=bool)
    violations = []
    stationary_time = None
    reason = "horizon"
    last_moving = -1
    t = 0
    diverged = None

    while True:
        ft = ctx.evaluate(state.true_x)
        if not (math.isfinite(ft) and np.isfinite(ctx.grad).all()):
            diverged = DivergenceError(t, "objective" if not math.isfinite(ft) else "gradient")
            break
        f[t] = ft
        res_s[t] = ctx.res_s
        res_u[t] = ctx.res_u
        dis[t] = ctx.k.disagreement(state.local_copies, state.true_x)
        if stop is not None and stationary_time is None:
            if math.sqrt(float(np.sum(ctx.res_u))) <= stop.tol and dis[t] <= stop.tol:
                stationary_time, why = t, "stationary"
            elif t >= window and t - 1 - last_moving >= window:
                stationary_time, why = t, "stalled"
            if stationary_time is not None and stop.halt:
                reason = why
                break
        if t == H:
            break
        rec = _advance(state, ctx)
        with np.errstate(over="ignore", invalid="ignore"):
            # an overflowing step is caught as divergence at the next evaluation
            step_blocks[t] = np.sqrt(np.add.reduceat(rec.steps * rec.steps, ctx.offsets[:-1]))
        grad_dot[t] = rec.grad_dot
        step_sq[t] = rec.step_sq
        grad_scale[t] = rec.grad_scale
        active[t] = rec.active
        violations.extend(rec.staleness_violations)
        if rec.steps.any():
            last_moving = t
        t += 1

    # a divergent trace ends at the last finite state, before the bad step
    T = t if diverged is None else t - 1
    S = max(T, 0)
    trace = RunTrace(
        f=f[:T + 1],
        step_blocks=step_blocks[:S],
        residual_blocks=res_s[:T + 1],
        residual_unscaled_blocks=res_u[:T + 1],
        disagreement=dis[:T + 1],
        grad_dot=grad_dot[:S],
        step_sq=step_sq[:S],
        grad_scale=grad_scale[:S],
        active=active[:S],
        staleness_violations=violations,
        final_state=state,
        plan=plan,
        block_sizes=problem.partition.sizes,
        horizon=H,
        stop_reason=reason if diverged is None else "diverged",
        stationary_time=stationary_time,
        problem_digest=problem.digest(),
        schedule_digest=sched.digest(),
        schedule_seed=sched.seed,
        backend=ctx.k.NAME,
    )
    if diverged is not None:
        if monitors and trace.f.size:
            trace.monitor = monitor_run(trace, problem)
        diverged.trace = trace
        raise diverged
    if monitors:
        trace.monitor = report = monitor_run(trace, problem)
        if not report.passed:
            mode = on_monitor_failure
            if mode == "auto":
                mode = "raise" if plan.within_bound else "warn"
            if mode == "raise":
                raise MonitorError(report, trace)
            if mode == "warn":
                warnings.warn(f"monitor failure: {', '.join(report.failures())}", MonitorWarning, stacklevel=2)
    return trace


@dataclass
class Theorem1Check:
    lhs: np.ndarray
    rhs: np.ndarray
    tol: np.ndarray
    worst_margin: float
    worst_prefix: int
    passed: bool


def monitor_theorem1(trace: RunTrace, C, rtol: float = THEOREM1_RTOL) -> Theorem1Check:
    """Check ``f(x(m)) - f(x(0)) <= -sum_i C_i sum_{t<m} |s^{[i]}(t)|^2`` for every prefix.

    The slack at prefix ``m`` is ``rtol * max(|f(x(0))|, |f(x(m))|)``.
    """
    C = np.asarray(C, dtype=np.float64)
    f = trace.f
    M = min(f.size, trace.step_blocks.shape[0] + 1)
    f = f[:M]
    lhs = f - f[0]
    per_step = (trace.step_blocks[:M - 1] ** 2) @ C
    rhs = -np.concatenate([[0.0], np.cumsum(per_step)])
    tol = rtol * np.maximum(abs(f[0]), np.abs(f))
    margin = rhs + tol - lhs
    k = int(np.argmin(margin))
    return Theorem1Check(lhs, rhs, tol, float(margin[k]), k, bool(margin[k] >= 0))


@dataclass
class Lemma3Check:
    margins: np.ndarray
    allowance: np.ndarray
    worst_margin: float
    worst_at: tuple | None
    strict_passed: bool
    passed: bool


def lemma3_margins(trace: RunTrace) -> np.ndarray:
    """``-(<s^{[i]}(t), grad_i f(x_i(t))> + |s^{[i]}(t)|^2 / gamma_i)``; NaN where idle."""
    m = -(trace.grad_dot + trace.step_sq / trace.plan.gammas)
    return np.where(trace.active, m, np.nan)


def monitor_lemma3(trace: RunTrace, atol: float = LEMMA3_ATOL) -> Lemma3Check:
    """Projection inequality at every update.

    ``strict_passed`` uses the bare absolute tolerance ``atol``.  ``passed``
    adds a rounding allowance: the step is a difference of stored states,
    so it is only known to about ``eps * |x|`` per coordinate, which moves
    the margin by roughly ``eps * |g| * |x|``.
    """
    margins = lemma3_margins(trace)
    sizes = np.asarray(trace.block_sizes, dtype=np.float64)
    allowance = atol + (4.0 + sizes) * EPS * trace.grad_scale
    if not np.isfinite(margins).any():
        return Lemma3Check(margins, allowance, math.inf, None, True, True)
    filled = np.where(trace.active, margins, np.inf)
    t, i = np.unravel_index(int(np.argmin(filled)), filled.shape)
    worst = float(filled[t, i])
    strict = bool(np.all(filled >= -atol))
    ok = bool(np.all(np.where(trace.active, margins + allowance, np.inf) >= 0))
    return Lemma3Check(margins, allowance, worst, (int(i), int(t)), strict, ok)


@dataclass
class MonitorReport:
    """Verdicts of the runtime descent monitors for one run."""

    theorem1: Theorem1Check
    lemma3: Lemma3Check
    staleness_violations: list
    descent_constants: np.ndarray
    square_sum: float
    square_sum_bound: float
    square_sum_passed: bool
    extra: dict = field(default_factory=dict)

    @property
    def theorem1_pass(self) -> bool:
        return self.theorem1.passed

    @property
    def lemma3_pass(self) -> bool:
        return self.lemma3.passed

    @property
    def staleness_pass(self) -> bool:
        return not self.staleness_violations

    @property
    def passed(self) -> bool:
        return self.theorem1_pass and self.lemma3_pass and self.staleness_pass and self.square_sum_passed

    def failures(self) -> list:
        out = []
        if not self.theorem1_pass:
            out.append(f"theorem1 (worst margin {self.theorem1.worst_margin!r} at m={self.theorem1.worst_prefix})")
        if not self.lemma3_pass:
            i, t = self.lemma3.worst_at
            out.append(f"lemma3 (worst margin {self.lemma3.worst_margin!r} at agent {i + 1}, t={t})")
        if not self.staleness_pass:
            out.append(f"staleness ({len(self.staleness_violations)} violations)")
        if not self.square_sum_passed:
            out.append("square-summability")
        return out

    def to_dict(self) -> dict:
        l3 = self.lemma3
        return {
            "passed": self.passed,
            "theorem1": {
                "passed": self.theorem1.passed,
                "worst_margin": self.theorem1.worst_margin,
                "worst_prefix": self.theorem1.worst_prefix,
                "final_lhs": float(self.theorem1.lhs[-1]),
                "final_rhs": float(self.theorem1.rhs[-1]),
            },
            "lemma3": {
                "passed": l3.passed,
                "strict_passed": l3.strict_passed,
                "worst_margin": l3.worst_margin if math.isfinite(l3.worst_margin) else None,
                "worst_agent": None if l3.worst_at is None else l3.worst_at[0] + 1,
                "worst_t": None if l3.worst_at is None else l3.worst_at[1],
                "updates_checked": int(np.isfinite(l3.margins).sum()),
            },
            "staleness": {
                "passed": self.staleness_pass,
                "violations": [[i + 1, j + 1, t] for i, j, t in self.staleness_violations[:100]],
                "violation_count": len(self.staleness_violations),
            },
            "square_summability": {
                "passed": self.square_sum_passed,
                "weighted_square_sum": self.square_sum,
                "descent_bound": self.square_sum_bound,
            },
            "descent_constants": self.descent_constants.tolist(),
            **self.extra,
        }


def monitor_run(trace: RunTrace, problem: Problem) -> MonitorReport:
    C = descent_constants(trace.plan, problem.lipschitz, problem.delays)
    th1 = monitor_theorem1(trace, C)
    l3 = monitor_lemma3(trace)
    M = th1.lhs.size
    sq = float((np.sum(trace.step_blocks[:M - 1] ** 2, axis=0)) @ C)
    f = trace.f[:M]
    bound = float(f[0] - f.min())
    tol = THEOREM1_RTOL * float(np.max(np.abs(f)))
    return MonitorReport(th1, l3, list(trace.staleness_violations), C, sq, bound, sq <= bound + tol)


# ---------------------------------------------------------------- export

CSV_FIXED = ("t", "f", "step_norm", "residual_total", "residual_unscaled_total", "max_disagreement")


def _fmt(v: float) -> str:
    return repr(float(v))


def trace_rows(trace: RunTrace):
    N = len(trace.block_sizes)
    yield list(CSV_FIXED) + [f"s_{i + 1}" for i in range(N)]
    step_norm = trace.step_norm
    rt, ru = trace.residual_total, trace.residual_unscaled_total
    T = trace.f.size
    for t in range(T):
        if t < trace.step_blocks.shape[0]:
            s_tot, s_blk = step_norm[t], trace.step_blocks[t]
        else:
            s_tot, s_blk = math.nan, [math.nan] * N
        yield [str(t), _fmt(trace.f[t]), _fmt(s_tot), _fmt(rt[t]), _fmt(ru[t]), _fmt(trace.disagreement[t])] + [
            _fmt(v) for v in s_blk]


def write_trace_csv(trace: RunTrace, path) -> Path:
    """One row per timestep; step columns of the final row are ``nan``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(trace_rows(trace))
    return path


def read_trace_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[k]) for r in body]) for k, h in enumerate(header)}
    cols["t"] = cols["t"].astype(np.int64)
    return cols


def write_monitor_report(trace: RunTrace, path) -> Path:
    path = Path(path)
    doc = {"run": trace.metadata(), "monitor": None if trace.monitor is None else trace.monitor.to_dict()}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
