"""Contiguous block partitions of a decision vector."""

from dataclasses import dataclass, field

import numpy as np

from .errors import BlockIndexError, DimensionError, InvalidPartitionError


@dataclass(frozen=True)
class BlockPartition:
    dims: tuple
    offsets: tuple = field(init=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidPartitionError("a partition needs at least one block")
        if any(d < 1 for d in dims):
            raise InvalidPartitionError(f"block dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offsets", tuple(int(o) for o in np.cumsum((0,) + dims[:-1])))

    @property
    def n(self):
        return len(self.dims)

    @property
    def dim(self):
        return self.offsets[-1] + self.dims[-1]

    def slice(self, i):
        self._check_index(i)
        return slice(self.offsets[i], self.offsets[i] + self.dims[i])

    def slices(self):
        return [self.slice(i) for i in range(self.n)]

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise BlockIndexError(f"block index {i} out of range for {self.n} blocks")

    def _check_vector(self, x):
        if np.shape(x) != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got shape {np.shape(x)}")


def make_partition(dims):
    return BlockPartition(tuple(dims))


def even_partition(d, n):
    """Split ``d`` coordinates into ``n`` near-equal blocks; the first ``d % n`` get one extra."""
    if n < 1 or d < n:
        raise InvalidPartitionError(f"cannot split {d} coordinates into {n} nonempty blocks")
    base, extra = divmod(d, n)
    return make_partition([base + 1 if i < extra else base for i in range(n)])


def block_slice(partition, x, i):
    """Return a view of block ``i`` of ``x``; writing into it updates ``x`` in place."""
    partition._check_vector(x)
    return x[partition.slice(i)]


def set_block(partition, x, i, value):
    partition._check_vector(x)
    sl = partition.slice(i)
    if np.shape(value) != (partition.dims[i],):
        raise DimensionError(f"block {i} has dimension {partition.dims[i]}, got {np.shape(value)}")
    x[sl] = value
    return x


def assemble(partition, blocks):
    if len(blocks) != partition.n:
        raise DimensionError(f"expected {partition.n} blocks, got {len(blocks)}")
    for i, b in enumerate(blocks):
        if np.shape(b) != (partition.dims[i],):
            raise DimensionError(f"block {i} has dimension {partition.dims[i]}, got {np.shape(b)}")
    return np.concatenate([np.asarray(b, dtype=float) for b in blocks])
