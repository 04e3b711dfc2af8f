"""Bounded-delay update and communication schedules.

Delay matrices are indexed ``D[i, j] = D^j_i``: the row is the receiving
agent ``i`` and the column the sending agent ``j``, so ``D[i, j]`` bounds
how stale agent ``i``'s copy of block ``j`` may be when ``i`` updates.
"""

from __future__ import annotations

import bisect
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import rng
from .errors import ConfigError

MODES = ("every-step", "randomized-updates")


@dataclass(frozen=True, eq=False)
class DelaySpec:
    """Delay bounds ``D`` (N x N), update-gap bounds ``G`` and the link mask.

    ``links[i, j]`` is true when agent ``i`` needs block ``j`` (``i != j``);
    unlinked pairs never communicate and must carry ``D[i, j] == 0``.
    """

    D: np.ndarray
    G: np.ndarray
    links: np.ndarray = None

    def __post_init__(self):
        D = np.array(self.D, dtype=np.int64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ConfigError(f"D must be square, got shape {D.shape}")
        N = D.shape[0]
        G = np.zeros(N, dtype=np.int64) if self.G is None else np.array(self.G, dtype=np.int64)
        if G.shape != (N,):
            raise ConfigError(f"G must have length {N}, got shape {G.shape}")
        if self.links is None:
            links = ~np.eye(N, dtype=bool)
        else:
            links = np.array(self.links, dtype=bool)
            if links.shape != (N, N):
                raise ConfigError(f"links must have shape {(N, N)}")
            np.fill_diagonal(links, False)
        if (D < 0).any() or (G < 0).any():
            raise ConfigError("delay and update bounds must be nonnegative")
        if np.diag(D).any():
            raise ConfigError("D^i_i must be 0 for every agent")
        if (D[~links] != 0).any():
            raise ConfigError("agents that do not communicate must have zero delay bounds")
        for name, arr in (("D", D), ("G", G), ("links", links)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.D.shape[0]

    @property
    def B(self) -> int:
        """max over i, j of D^j_i, D^i_j and G_i."""
        return int(max(self.D.max(initial=0), self.G.max(initial=0)))

    def window(self) -> int:
        """Length of the shortest window that certifies a stalled network."""
        return int(max(self.G.max(initial=0), self.D.max(initial=0))) + 1

    def to_dict(self) -> dict:
        return {"D": self.D.tolist(), "G": self.G.tolist(), "links": self.links.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DelaySpec":
        return cls(np.array(d["D"]), np.array(d["G"]), np.array(d["links"], dtype=bool) if "links" in d else None)

    def __eq__(self, other):
        if not isinstance(other, DelaySpec):
            return NotImplemented
        return (np.array_equal(self.D, other.D) and np.array_equal(self.G, other.G)
                and np.array_equal(self.links, other.links))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Schedule:
    """Update sets ``T^i`` and per-link arrival times on ``{0..horizon}``.

    ``arrivals[(i, j)]`` lists the times at which agent ``i`` receives
    agent ``j``'s block.  An arrival at ``t`` delivers ``x_j^{[j]}(t)``.
    """

    horizon: int
    updates: tuple
    arrivals: dict
    seed: int | None = None
    mode: str = "custom"

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        ups = tuple(np.unique(np.asarray(u, dtype=np.int64)) for u in self.updates)
        arr = {(int(i), int(j)): np.unique(np.asarray(ts, dtype=np.int64))
               for (i, j), ts in sorted(self.arrivals.items())}
        N = len(ups)
        for (i, j) in arr:
            if not (0 <= i < N and 0 <= j < N) or i == j:
                raise ConfigError(f"invalid link ({i}, {j}) for N={N}")
        for a in list(ups) + list(arr.values()):
            a.setflags(write=False)
            if a.size and (a[0] < 0 or a[-1] > self.horizon):
                raise ConfigError("schedule times must lie in {0..horizon}")
        object.__setattr__(self, "updates", ups)
        object.__setattr__(self, "arrivals", arr)

    @property
    def N(self) -> int:
        return len(self.updates)

    @cached_property
    def update_mask(self) -> np.ndarray:
        """``mask[t, i]`` true iff ``t in T^i``; shape (horizon+1, N)."""
        m = np.zeros((self.horizon + 1, self.N), dtype=np.uint8)
        for i, ts in enumerate(self.updates):
            m[ts, i] = 1
        return m

    @cached_property
    def arrival_mask(self) -> np.ndarray:
        """``mask[t, i, j]`` true iff agent i receives block j at t."""
        m = np.zeros((self.horizon + 1, self.N, self.N), dtype=np.uint8)
        for (i, j), ts in self.arrivals.items():
            m[ts, i, j] = 1
        return m

    def to_dict(self) -> dict:
        return {
            "horizon": int(self.horizon),
            "seed": None if self.seed is None else int(self.seed),
            "mode": self.mode,
            "updates": [u.tolist() for u in self.updates],
            "arrivals": [[i, j, ts.tolist()] for (i, j), ts in self.arrivals.items()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(d["horizon"], tuple(d["updates"]), {(i, j): ts for i, j, ts in d["arrivals"]},
                   d.get("seed"), d.get("mode", "custom"))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _link_times(gen: np.random.Generator, bound: int, horizon: int) -> np.ndarray:
    # first delivery at t=0, then t + 1 + delta with delta ~ U{0..bound}
    times = [0]
    t = 0
    while True:
        t += 1 + int(gen.integers(0, bound + 1))
        if t > horizon:
            break
        times.append(t)
    return np.array(times, dtype=np.int64)


def _update_times(gen: np.random.Generator, gap: int, horizon: int) -> np.ndarray:
    if gap == 0:
        return np.arange(horizon + 1, dtype=np.int64)
    times = []
    t = int(gen.integers(0, gap + 1))
    while t <= horizon:
        times.append(t)
        t += 1 + int(gen.integers(0, gap + 1))
    return np.array(times, dtype=np.int64)


def build_schedule(spec: DelaySpec, horizon: int, seed: int, mode: str = "every-step") -> Schedule:
    """Draw a schedule satisfying the bounded-delay and bounded-update-gap model.

    In ``every-step`` mode every agent updates at every timestep.  In
    ``randomized-updates`` mode agent ``i``'s consecutive updates are at
    most ``G_i + 1`` steps apart and its first update is no later than
    ``G_i``.  Each link and each agent has its own random stream.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown schedule mode {mode!r}; expected one of {MODES}")
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    seed = rng.check_seed(seed)
    N = spec.N
    if mode == "every-step":
        updates = tuple(np.arange(horizon + 1, dtype=np.int64) for _ in range(N))
    else:
        updates = tuple(_update_times(rng.stream(seed, rng.AGENT, i), int(spec.G[i]), horizon)
                        for i in range(N))
    arrivals = {}
    for i in range(N):
        for j in range(N):
            if spec.links[i, j]:
                arrivals[(i, j)] = _link_times(rng.stream(seed, rng.LINK, i, j), int(spec.D[i, j]), horizon)
    return Schedule(horizon, updates, arrivals, seed, mode)


def staleness(sched: Schedule, i: int, j: int, t: int) -> int:
    """Timestamp ``tau^j_i(t)`` of the block-``j`` value agent ``i`` holds at ``t``.

    Unlinked pairs never receive anything and keep the initial value, so
    they report 0.
    """
    if not 0 <= t <= sched.horizon:
        raise ConfigError(f"t={t} outside schedule horizon {sched.horizon}")
    if i == j:
        return t
    ts = sched.arrivals.get((i, j))
    if ts is None or ts.size == 0:
        return 0
    k = bisect.bisect_right(ts.tolist(), t)
    return int(ts[k - 1]) if k else 0


@dataclass
class Verdict:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_partial_asynchrony(sched: Schedule, spec: DelaySpec) -> Verdict:
    """Check every staleness and update-gap bound over the schedule horizon.

    Violations are tuples ``("delay", i, j, t)`` for an update of agent
    ``i`` at ``t`` whose copy of block ``j`` is too stale, and
    ``("update-gap", i, None, t)`` for a window ``{t..t+G_i}`` that misses
    ``T^i``.  Windows reaching past the horizon are not checked.
    """
    if sched.N != spec.N:
        raise ConfigError(f"schedule has {sched.N} agents, delay spec has {spec.N}")
    violations = []
    H = sched.horizon
    for i in range(spec.N):
        T_i = sched.updates[i]
        for j in range(spec.N):
            if not spec.links[i, j]:
                continue
            arr = sched.arrivals.get((i, j), np.empty(0, dtype=np.int64))
            # tau at each update = last arrival <= t; the initial copy counts as time 0
            k = np.searchsorted(arr, T_i, side="right")
            tau = np.where(k > 0, arr[np.maximum(k - 1, 0)] if arr.size else 0, 0)
            bad = T_i - tau > spec.D[i, j]
            violations.extend(("delay", i, j, int(t)) for t in T_i[bad])
        g = int(spec.G[i])
        if H - g >= 0:
            has = np.zeros(H + 2, dtype=np.int64)
            has[T_i + 1] = 1
            csum = np.cumsum(has)
            starts = np.arange(H - g + 1)
            counts = csum[starts + g + 1] - csum[starts]
            violations.extend(("update-gap", i, None, int(t)) for t in starts[counts == 0])
    violations.sort(key=lambda v: (v[3], v[1], -1 if v[2] is None else v[2], v[0]))
    return Verdict(not violations, violations)
