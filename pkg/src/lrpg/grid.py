"""Uniform state discretisation onto matrix coordinates.

Each state dimension is binned uniformly; the dimensions are split into a
row group and a column group and each group is flattened mixed-radix (first
listed dimension most significant) into a single index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Dim:
    low: float
    high: float
    bins: int

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)) or not self.low < self.high:
            raise ValueError(f"need finite low < high, got [{self.low}, {self.high}]")
        if int(self.bins) != self.bins or self.bins < 1:
            raise ValueError(f"bins must be a positive integer, got {self.bins!r}")


def bin_of(low: float, high: float, bins: int, x: float) -> int:
    """Bin of ``x`` among ``bins`` equal cells of ``[low, high)``, clamped at both ends."""
    if not math.isfinite(x):
        raise ValueError(f"cannot bin non-finite value {x!r}")
    b = math.floor((x - low) / (high - low) * bins)
    if b < 0:
        return 0
    if b >= bins:
        return bins - 1
    return b


@dataclass(frozen=True)
class GridSpec:
    dims: tuple[Dim, ...]
    row_group: tuple[int, ...]
    col_group: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(d if isinstance(d, Dim) else Dim(*d) for d in self.dims))
        object.__setattr__(self, "row_group", tuple(int(d) for d in self.row_group))
        object.__setattr__(self, "col_group", tuple(int(d) for d in self.col_group))
        if not self.row_group or not self.col_group:
            raise ValueError("row_group and col_group must both be non-empty")
        both = self.row_group + self.col_group
        if sorted(both) != list(range(len(self.dims))):
            raise ValueError(
                f"row_group {self.row_group} and col_group {self.col_group} must partition "
                f"dimensions 0..{len(self.dims) - 1}")

    @classmethod
    def split(cls, dims: Sequence, row_dims: int | None = None) -> "GridSpec":
        """Put the first ``row_dims`` dimensions (default: first half, rounded up) on rows."""
        n = len(dims)
        if row_dims is None:
            row_dims = (n + 1) // 2
        return cls(tuple(dims), tuple(range(row_dims)), tuple(range(row_dims, n)))

    @property
    def rows(self) -> int:
        return math.prod(self.dims[d].bins for d in self.row_group)

    @property
    def cols(self) -> int:
        return math.prod(self.dims[d].bins for d in self.col_group)

    def _group_index(self, group, state) -> int:
        idx = 0
        for d in group:
            dim = self.dims[d]
            idx = idx * dim.bins + bin_of(dim.low, dim.high, dim.bins, state[d])
        return idx

    def encode(self, state) -> tuple[int, int]:
        if len(state) != len(self.dims):
            raise ValueError(f"state has {len(state)} components, grid has {len(self.dims)} dims")
        return self._group_index(self.row_group, state), self._group_index(self.col_group, state)

    def cell_center(self, i: int, j: int) -> list[float]:
        """Centre point of cell ``(i, j)``; inverse of :meth:`encode` on cell centres."""
        state = [0.0] * len(self.dims)
        for group, idx in ((self.row_group, i), (self.col_group, j)):
            for d in reversed(group):
                dim = self.dims[d]
                idx, b = divmod(idx, dim.bins)
                state[d] = dim.low + (b + 0.5) * (dim.high - dim.low) / dim.bins
        return state


def rows(spec: GridSpec) -> int:
    return spec.rows


def cols(spec: GridSpec) -> int:
    return spec.cols


def encode(spec: GridSpec, state) -> tuple[int, int]:
    return spec.encode(state)
