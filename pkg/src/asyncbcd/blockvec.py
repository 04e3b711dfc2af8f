"""Block-partitioned vectors.

Indexing convention: every function in the package takes 0-based agent
indices.  Only human-facing output (CSV column names, printed summaries,
reports) labels agents 1..N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PartitionError


@dataclass(frozen=True)
class BlockPartition:
    """Sizes ``n_1..n_N`` splitting R^n into contiguous agent-owned blocks."""

    sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise PartitionError("partition must contain at least one block")
        if any(s < 1 for s in sizes):
            raise PartitionError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist()))

    @classmethod
    def scalar(cls, N: int) -> "BlockPartition":
        return cls((1,) * int(N))

    @property
    def N(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return self.offsets[-1]

    def slice(self, i: int) -> slice:
        if not 0 <= i < self.N:
            raise PartitionError(f"block index {i} out of range for N={self.N}")
        return slice(self.offsets[i], self.offsets[i + 1])

    def offsets_array(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=np.intp)

    def check_length(self, v) -> None:
        if len(v) != self.n:
            raise PartitionError(f"vector of length {len(v)} does not match partition n={self.n}")


class BlockVector:
    """A dense float64 vector addressed by agent block.

    ``block(i)`` returns a numpy view, so writes through it touch only
    block ``i``.
    """

    __slots__ = ("data", "partition")

    def __init__(self, data, partition: BlockPartition, copy: bool = True):
        arr = np.array(data, dtype=np.float64, copy=copy)
        if arr.ndim != 1:
            raise PartitionError("BlockVector data must be one-dimensional")
        partition.check_length(arr)
        self.data = arr
        self.partition = partition

    @classmethod
    def zeros(cls, partition: BlockPartition) -> "BlockVector":
        return cls(np.zeros(partition.n), partition, copy=False)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.partition.slice(i)]

    def set_block(self, i: int, values) -> None:
        sl = self.partition.slice(i)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (sl.stop - sl.start,):
            raise PartitionError(f"block {i} expects {sl.stop - sl.start} entries, got shape {values.shape}")
        self.data[sl] = values

    def blocks(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(self.partition.N)]

    def norms(self) -> np.ndarray:
        return block_norms(self)

    def copy(self) -> "BlockVector":
        return BlockVector(self.data, self.partition, copy=True)

    def __len__(self) -> int:
        return self.partition.n

    def __repr__(self) -> str:
        return f"BlockVector({self.data.tolist()!r}, sizes={self.partition.sizes})"


def block_view(v: BlockVector, i: int) -> np.ndarray:
    """Return the (writable) view of block ``i`` of ``v``."""
    return v.block(i)


def block_norms(v) -> np.ndarray:
    """Euclidean norm of every block of ``v``.

    Accepts a :class:`BlockVector`, or a ``(data, partition)`` pair.
    """
    if isinstance(v, BlockVector):
        data, part = v.data, v.partition
    else:
        data, part = v
        data = np.asarray(data, dtype=np.float64)
        part.check_length(data)
    sq = np.add.reduceat(data * data, part.offsets_array()[:-1])
    return np.sqrt(sq)
