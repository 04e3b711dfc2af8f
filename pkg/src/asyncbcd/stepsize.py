"""Local (uncoordinated) and global (coordinated) stepsize rules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .asynchrony import DelaySpec
from .errors import ConfigError, DegenerateAgentError
from .objective import BlockLipschitzMatrix

DEFAULT_SAFETY = 0.95
RULES = ("local", "global", "manual")


class StepsizeBoundWarning(UserWarning):
    """A plan was built with stepsizes at or above the convergence bound."""


@dataclass(frozen=True, eq=False)
class StepsizePlan:
    """Per-agent stepsizes plus the bounds they were derived from.

    ``bounds[i]`` is the upper limit for ``gammas[i]`` under ``rule``; for
    manual plans it is the local-rule bound (``inf`` for isolated agents).
    """

    gammas: np.ndarray
    rule: str
    safety: float | None
    bounds: np.ndarray

    def __post_init__(self):
        g = np.array(self.gammas, dtype=np.float64)
        b = np.array(self.bounds, dtype=np.float64)
        if g.ndim != 1 or b.shape != g.shape:
            raise ConfigError("gammas and bounds must be vectors of equal length")
        if not (np.isfinite(g).all() and (g > 0).all()):
            raise ConfigError(f"stepsizes must be finite and positive, got {g.tolist()}")
        if self.rule not in RULES:
            raise ConfigError(f"unknown stepsize rule {self.rule!r}")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "bounds", b)

    @property
    def N(self) -> int:
        return self.gammas.size

    @property
    def within_bound(self) -> bool:
        return bool(np.all(self.gammas < self.bounds))

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "safety": self.safety,
            "gammas": self.gammas.tolist(),
            "bounds": [b if math.isfinite(b) else "inf" for b in self.bounds.tolist()],
        }


def _check_safety(safety: float, unsafe: bool) -> float:
    safety = float(safety)
    if not safety > 0:
        raise ConfigError(f"safety factor must be positive, got {safety}")
    if safety > 1:
        if not unsafe:
            raise ConfigError(f"safety factor {safety} > 1 violates the stepsize bound; pass unsafe=True to allow it")
        warnings.warn(f"safety factor {safety} puts every stepsize above its bound", StepsizeBoundWarning, stacklevel=3)
    return safety


def local_weight(L_row, D_in, D_out) -> float:
    """``sum_j L^i_j (1 + D^j_i + D^i_j)`` from agent ``i``'s own data.

    ``L_row = L[i, :]``, ``D_in = D[i, :]`` (delays on blocks ``i``
    receives) and ``D_out = D[:, i]`` (delays on block ``i`` at others).
    """
    L_row = np.asarray(L_row, dtype=np.float64)
    D_in = np.asarray(D_in, dtype=np.float64)
    D_out = np.asarray(D_out, dtype=np.float64)
    total = 0.0
    for l, a, b in zip(L_row.tolist(), D_in.tolist(), D_out.tolist()):
        total += l * (1.0 + a + b)
    return total


def local_stepsize(L_row, D_in, D_out, safety: float = DEFAULT_SAFETY, unsafe: bool = False) -> float:
    """One agent's locally chosen stepsize; see :func:`local_weight`."""
    safety = _check_safety(safety, unsafe)
    w = local_weight(L_row, D_in, D_out)
    if w <= 0:
        raise DegenerateAgentError([])
    return safety * (2.0 / w)


def local_bounds(L: BlockLipschitzMatrix, spec: DelaySpec) -> np.ndarray:
    Lm = np.asarray(L.L if isinstance(L, BlockLipschitzMatrix) else L, dtype=np.float64)
    if Lm.shape != spec.D.shape:
        raise ConfigError(f"L has shape {Lm.shape}, D has shape {spec.D.shape}")
    w = np.array([local_weight(Lm[i], spec.D[i], spec.D[:, i]) for i in range(Lm.shape[0])])
    with np.errstate(divide="ignore"):
        return np.where(w > 0, 2.0 / np.where(w > 0, w, 1.0), np.inf)


def local_stepsizes(L: BlockLipschitzMatrix, spec: DelaySpec, safety: float = DEFAULT_SAFETY,
                    unsafe: bool = False) -> StepsizePlan:
    """``gamma_i = safety * 2 / sum_j L^i_j (1 + D^j_i + D^i_j)`` for every agent."""
    safety = _check_safety(safety, unsafe)
    bounds = local_bounds(L, spec)
    isolated = np.flatnonzero(~np.isfinite(bounds))
    if isolated.size:
        raise DegenerateAgentError(isolated.tolist())
    return StepsizePlan(safety * bounds, "local", safety, bounds)


def global_bound(L_global: float, N: int, B: int) -> float:
    return 2.0 / (L_global * (1.0 + 2.0 * math.sqrt(N) * B))


def global_stepsize(L_global: float, N: int, B: int, safety: float = DEFAULT_SAFETY,
                    unsafe: bool = False) -> StepsizePlan:
    """Shared ``gamma = safety * 2 / (L (1 + 2 sqrt(N) B))`` for all agents."""
    if not L_global > 0:
        raise ConfigError(f"global Lipschitz constant must be positive, got {L_global}")
    if N < 1 or B < 0:
        raise ConfigError(f"need N >= 1 and B >= 0, got N={N}, B={B}")
    safety = _check_safety(safety, unsafe)
    bound = global_bound(float(L_global), int(N), int(B))
    return StepsizePlan(np.full(N, safety * bound), "global", safety, np.full(N, bound))


def manual_plan(gammas, L: BlockLipschitzMatrix, spec: DelaySpec) -> StepsizePlan:
    """Wrap user-chosen stepsizes, recording the local bounds for reference."""
    bounds = local_bounds(L, spec)
    plan = StepsizePlan(gammas, "manual", None, bounds)
    if plan.N != spec.N:
        raise ConfigError(f"expected {spec.N} stepsizes, got {plan.N}")
    if not plan.within_bound:
        warnings.warn("manual stepsizes exceed the local bound; monitors will report rather than abort",
                      StepsizeBoundWarning, stacklevel=2)
    return plan


def plan_for_problem(problem, rule: str, safety: float = DEFAULT_SAFETY, gammas=None,
                     unsafe: bool = False) -> StepsizePlan:
    L = problem.lipschitz
    if rule == "local":
        return local_stepsizes(L, problem.delays, safety, unsafe)
    if rule == "global":
        return global_stepsize(L.L_global, problem.N, problem.delays.B, safety, unsafe)
    if rule == "manual":
        if gammas is None:
            raise ConfigError("manual rule requires explicit stepsizes")
        g = np.broadcast_to(np.asarray(gammas, dtype=np.float64), (problem.N,))
        return manual_plan(g, L, problem.delays)
    raise ConfigError(f"unknown stepsize rule {rule!r}; expected one of {RULES}")


def descent_constants(plan: StepsizePlan, L: BlockLipschitzMatrix, spec: DelaySpec) -> np.ndarray:
    """``C_i = 1/gamma_i - 1/2 sum_j L^i_j (1 + D^j_i + D^i_j)``.

    Positive exactly when ``gamma_i`` is below the local bound.
    """
    Lm = np.asarray(L.L if isinstance(L, BlockLipschitzMatrix) else L, dtype=np.float64)
    w = np.array([local_weight(Lm[i], spec.D[i], spec.D[:, i]) for i in range(Lm.shape[0])])
    return 1.0 / plan.gammas - 0.5 * w
