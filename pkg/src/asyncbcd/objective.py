"""Quadratic objectives, block-Lipschitz constants, box constraints and the
random nonconvex test-problem generator."""

from __future__ import annotations

import abc
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import rng
from .asynchrony import DelaySpec
from .blockvec import BlockPartition, BlockVector
from .errors import ConfigError, FeasibilityError, PartitionError

EIG_MAX_DIM = 64
POWER_TOL = 1e-10
POWER_MAXITER = 10000
SPECTRA = ("reflected", "indefinite")

PROBLEM_FORMAT = "asyncbcd-problem"
PROBLEM_VERSION = 1


def spectral_norm(M, symmetric: bool = False) -> float:
    """Largest singular value of ``M``.

    Dense decompositions are used while both dimensions are at most 64;
    larger matrices fall back to power iteration on ``M^T M``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    if M.shape == (1, 1):
        return abs(float(M[0, 0]))
    if max(M.shape) <= EIG_MAX_DIM:
        if symmetric:
            return float(np.max(np.abs(np.linalg.eigvalsh(M))))
        return float(np.linalg.norm(M, 2))
    return _power_norm(M)


def _power_norm(M: np.ndarray) -> float:
    if not M.any():
        return 0.0
    v = np.ones(M.shape[1]) / math.sqrt(M.shape[1])
    sigma = 0.0
    for _ in range(POWER_MAXITER):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - sigma) <= POWER_TOL * new:
            return new
        sigma = new
    return sigma


class SmoothObjective(abc.ABC):
    """Interface for objectives the simulator can drive.

    Only :class:`QuadraticObjective` ships; the engine's compiled kernels
    are specialised to it.
    """

    partition: BlockPartition

    @abc.abstractmethod
    def value(self, x) -> float: ...

    @abc.abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    def gradient_block(self, x, i: int) -> np.ndarray:
        return self.gradient(x)[self.partition.slice(i)]

    @abc.abstractmethod
    def block_lipschitz(self) -> "BlockLipschitzMatrix": ...


@dataclass(frozen=True)
class BlockLipschitzMatrix:
    """``L[i, j]``: Lipschitz modulus of gradient block ``i`` in block ``j``."""

    L: np.ndarray
    L_global: float

    @property
    def N(self) -> int:
        return self.L.shape[0]


class QuadraticObjective(SmoothObjective):
    """``f(x) = 1/2 x^T Q x + r^T x``; ``Q`` is symmetrised on construction."""

    def __init__(self, Q, r, partition: BlockPartition | None = None):
        Q = np.array(Q, dtype=np.float64)
        r = np.array(r, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ConfigError(f"Q must be square, got shape {Q.shape}")
        if r.shape != (Q.shape[0],):
            raise ConfigError(f"r must have length {Q.shape[0]}, got shape {r.shape}")
        if partition is None:
            partition = BlockPartition.scalar(Q.shape[0])
        partition.check_length(r)
        Q = (Q + Q.T) / 2
        Q.setflags(write=False)
        r.setflags(write=False)
        self.Q, self.r, self.partition = Q, r, partition

    def _data(self, x) -> np.ndarray:
        if isinstance(x, BlockVector):
            if x.partition != self.partition:
                raise PartitionError("vector partition does not match objective partition")
            return x.data
        x = np.asarray(x, dtype=np.float64)
        self.partition.check_length(x)
        return x

    def value(self, x) -> float:
        x = self._data(x)
        return float(0.5 * x @ (self.Q @ x) + self.r @ x)

    def gradient(self, x) -> np.ndarray:
        x = self._data(x)
        return self.Q @ x + self.r

    def gradient_block(self, x, i: int) -> np.ndarray:
        x = self._data(x)
        sl = self.partition.slice(i)
        return self.Q[sl] @ x + self.r[sl]

    @cached_property
    def _lipschitz(self) -> BlockLipschitzMatrix:
        part = self.partition
        N = part.N
        L = np.zeros((N, N))
        for i in range(N):
            for j in range(i, N):
                blk = self.Q[part.slice(i), part.slice(j)]
                L[i, j] = L[j, i] = spectral_norm(blk, symmetric=(i == j))
        L.setflags(write=False)
        return BlockLipschitzMatrix(L, spectral_norm(self.Q, symmetric=True))

    def block_lipschitz(self) -> BlockLipschitzMatrix:
        return self._lipschitz


def block_lipschitz(obj: SmoothObjective) -> BlockLipschitzMatrix:
    return obj.block_lipschitz()


def gradient_block(obj: SmoothObjective, x, i: int) -> np.ndarray:
    return obj.gradient_block(x, i)


class BoxConstraint:
    """Product of per-coordinate intervals; bounds may be infinite."""

    def __init__(self, lower, upper, partition: BlockPartition):
        lower = np.array(lower, dtype=np.float64)
        upper = np.array(upper, dtype=np.float64)
        partition.check_length(lower)
        partition.check_length(upper)
        if np.isnan(lower).any() or np.isnan(upper).any() or (lower > upper).any():
            raise ConfigError("box bounds must satisfy lower <= upper entrywise")
        if np.isposinf(lower).any() or np.isneginf(upper).any():
            raise ConfigError("box would be empty")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower, self.upper, self.partition = lower, upper, partition

    @classmethod
    def symmetric(cls, radius: float, partition: BlockPartition) -> "BoxConstraint":
        return cls(np.full(partition.n, -radius), np.full(partition.n, radius), partition)

    @classmethod
    def unbounded(cls, partition: BlockPartition) -> "BoxConstraint":
        return cls.symmetric(math.inf, partition)

    def project_block(self, i: int, y) -> np.ndarray:
        sl = self.partition.slice(i)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (sl.stop - sl.start,):
            raise PartitionError(f"block {i} has {sl.stop - sl.start} entries, got shape {y.shape}")
        return np.minimum(np.maximum(y, self.lower[sl]), self.upper[sl])

    def project(self, y) -> np.ndarray:
        y = y.data if isinstance(y, BlockVector) else np.asarray(y, dtype=np.float64)
        return np.minimum(np.maximum(y, self.lower), self.upper)

    def contains(self, x) -> bool:
        x = x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=np.float64)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def require(self, x) -> None:
        if not self.contains(x):
            raise FeasibilityError("point lies outside the constraint set")


def project_block(c: BoxConstraint, i: int, y) -> np.ndarray:
    return c.project_block(i, y)


@dataclass(eq=False)
class Problem:
    """Everything a run needs besides the schedule and stepsizes."""

    objective: QuadraticObjective
    constraint: BoxConstraint
    delays: DelaySpec
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.constraint.partition != self.objective.partition:
            raise PartitionError("constraint and objective partitions differ")
        if self.delays.N != self.partition.N:
            raise ConfigError(f"delay spec has {self.delays.N} agents, partition has {self.partition.N}")

    @property
    def partition(self) -> BlockPartition:
        return self.objective.partition

    @property
    def N(self) -> int:
        return self.partition.N

    @property
    def lipschitz(self) -> BlockLipschitzMatrix:
        return self.objective.block_lipschitz()

    def to_dict(self) -> dict:
        return {
            "format": PROBLEM_FORMAT,
            "version": PROBLEM_VERSION,
            "seed": self.seed,
            "params": self.params,
            "block_sizes": list(self.partition.sizes),
            "Q": [[_enc(v) for v in row] for row in self.objective.Q.tolist()],
            "r": [_enc(v) for v in self.objective.r.tolist()],
            "lower": [_enc(v) for v in self.constraint.lower.tolist()],
            "upper": [_enc(v) for v in self.constraint.upper.tolist()],
            **self.delays.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        if d.get("format") != PROBLEM_FORMAT:
            raise ConfigError(f"not a problem document (format={d.get('format')!r})")
        if d.get("version") != PROBLEM_VERSION:
            raise ConfigError(f"unsupported problem document version {d.get('version')!r}")
        part = BlockPartition(tuple(d["block_sizes"]))
        Q = np.array([[_dec(v) for v in row] for row in d["Q"]], dtype=np.float64)
        obj = QuadraticObjective(Q, [_dec(v) for v in d["r"]], part)
        box = BoxConstraint([_dec(v) for v in d["lower"]], [_dec(v) for v in d["upper"]], part)
        return cls(obj, box, DelaySpec.from_dict(d), d.get("seed"), d.get("params", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _enc(v: float):
    # JSON numbers use repr(), which round-trips float64 exactly
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else "-inf"


def _dec(v) -> float:
    return float(v)


def save_problem(problem: Problem, path) -> Path:
    path = Path(path)
    path.write_text(problem.dumps(), encoding="utf-8")
    return path


def load_problem(path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return Problem.from_dict(json.load(fh))


def generate_problem(
    seed: int,
    N: int,
    block_sizes=None,
    L_target: float = 100.0,
    box_radius: float = 1e4,
    delay_max: int = 20,
    update_gap_max: int = 0,
    spectrum: str = "reflected",
) -> Problem:
    """Random nonconvex box-constrained quadratic with random delay bounds.

    ``Q`` starts as a symmetrised matrix of i.i.d. standard normals ``W``.
    With ``spectrum="reflected"`` (default) every eigenvalue is replaced by
    minus its absolute value, giving a concave ``f`` whose local minima over
    the box are vertices.  ``spectrum="indefinite"`` keeps ``W`` as drawn
    (reflecting its top eigenvalue in the rare case that ``W`` is positive
    semidefinite).  ``Q`` is then scaled to spectral norm ``L_target``.

    ``r`` is uniform on ``[-L_target, L_target]``; the box is
    ``|x_k| <= box_radius``; ``D^j_i`` is uniform on ``{0..delay_max}``
    independently for each ordered pair with ``L^i_j != 0`` (zero
    otherwise); ``G_i`` is uniform on ``{0..update_gap_max}``.
    """
    N = int(N)
    if N < 1:
        raise ConfigError(f"need at least one agent, got N={N}")
    if not L_target > 0:
        raise ConfigError(f"L_target must be positive, got {L_target}")
    if not box_radius > 0:
        raise ConfigError(f"box_radius must be positive, got {box_radius}")
    if delay_max < 0 or update_gap_max < 0:
        raise ConfigError("delay_max and update_gap_max must be nonnegative")
    if spectrum not in SPECTRA:
        raise ConfigError(f"unknown spectrum {spectrum!r}; expected one of {SPECTRA}")
    sizes = (1,) * N if block_sizes is None else tuple(int(s) for s in block_sizes)
    if len(sizes) != N:
        raise ConfigError(f"block_sizes has {len(sizes)} entries, expected N={N}")
    try:
        part = BlockPartition(sizes)
    except PartitionError as exc:
        raise ConfigError(str(exc)) from exc
    seed = rng.check_seed(seed)
    n = part.n

    A = rng.stream(seed, rng.PROBLEM_MATRIX).standard_normal((n, n))
    W = (A + A.T) / 2
    w, U = np.linalg.eigh(W)
    if spectrum == "reflected":
        Q = (U * -np.abs(w)) @ U.T
    else:
        Q = W
        if w[0] >= 0:
            Q = W - 2 * w[-1] * np.outer(U[:, -1], U[:, -1])
    Q = (Q + Q.T) / 2
    Q = Q * (L_target / spectral_norm(Q, symmetric=True))
    r = rng.stream(seed, rng.PROBLEM_LINEAR).uniform(-L_target, L_target, n)
    obj = QuadraticObjective(Q, r, part)

    links = obj.block_lipschitz().L != 0
    np.fill_diagonal(links, False)
    D = rng.stream(seed, rng.PROBLEM_DELAYS).integers(0, delay_max + 1, size=(N, N))
    D[~links] = 0
    np.fill_diagonal(D, 0)
    if update_gap_max:
        G = rng.stream(seed, rng.PROBLEM_UPDATES).integers(0, update_gap_max + 1, size=N)
    else:
        G = np.zeros(N, dtype=np.int64)

    params = {
        "N": N,
        "block_sizes": list(sizes),
        "L_target": float(L_target),
        "box_radius": _enc(float(box_radius)),
        "delay_max": int(delay_max),
        "update_gap_max": int(update_gap_max),
        "spectrum": spectrum,
    }
    return Problem(obj, BoxConstraint.symmetric(float(box_radius), part), DelaySpec(D, G, links), seed, params)
