"""Periodic lattices on the unit torus and functions sampled on them.

Points are indexed row-major over axes: in 2-D the point with multi-index
``(i, j)`` has flat index ``i * n + j``.  Coordinates are ``index * h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    n_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_per_axis < 2:
            raise ValueError(f"n_per_axis must be >= 2, got {self.n_per_axis}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_axis

    @property
    def size(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    def multi_index(self, idx: int) -> tuple[int, ...]:
        self._check_index(idx)
        return tuple(int(i) for i in np.unravel_index(idx, self.shape))

    def flat_index(self, multi) -> int:
        multi = tuple(int(i) for i in np.atleast_1d(multi))
        if len(multi) != self.dim or any(not 0 <= i < self.n_per_axis for i in multi):
            raise ValueError(f"multi-index {multi} out of range for {self}")
        return int(np.ravel_multi_index(multi, self.shape))

    def neighbor(self, idx, axis: int, direction: int):
        """Periodic neighbor of ``idx`` one step along ``axis``.

        ``idx`` may be a flat index or a multi-index tuple; the result has
        the same form.
        """
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for dim {self.dim}")
        if direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {direction}")
        if isinstance(idx, (tuple, list)):
            multi = list(self.multi_index(self.flat_index(idx)))
            multi[axis] = (multi[axis] + direction) % self.n_per_axis
            return tuple(multi)
        return int(self.neighbor_table[axis, 0 if direction == 1 else 1][self._check_index(idx)])

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """Array ``[axis, k, point]`` of neighbors; k=0 is +1, k=1 is -1."""
        ids = np.arange(self.size).reshape(self.shape)
        table = np.empty((self.dim, 2, self.size), dtype=np.intp)
        for axis in range(self.dim):
            table[axis, 0] = np.roll(ids, -1, axis=axis).ravel()
            table[axis, 1] = np.roll(ids, 1, axis=axis).ravel()
        table.flags.writeable = False
        return table

    @cached_property
    def coords(self) -> np.ndarray:
        """Point coordinates, shape ``(size, dim)``."""
        axes = np.meshgrid(*[np.arange(self.n_per_axis) * self.h] * self.dim, indexing="ij")
        out = np.stack([ax.ravel() for ax in axes], axis=1)
        out.flags.writeable = False
        return out

    def _check_index(self, idx) -> int:
        if not 0 <= int(idx) < self.size:
            raise ValueError(f"point index {idx} out of range [0, {self.size})")
        return int(idx)


@dataclass(frozen=True)
class GridFunction:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.grid.size

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values(other))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _values(obj):
    return obj.values if isinstance(obj, GridFunction) else obj


def neighbor(grid: TorusGrid, idx, axis: int, direction: int):
    return grid.neighbor(idx, axis, direction)


def sup_norm(f) -> float:
    vals = np.asarray(_values(f), dtype=float)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def oscillation(f) -> float:
    """max f - min f; the discrete stand-in for an equicontinuity modulus."""
    vals = np.asarray(_values(f), dtype=float)
    return float(vals.max() - vals.min()) if vals.size else 0.0
