"""Half-open b-adic cells.

A depth-n cell with base b and integer index vector k is the box
prod_j [k_j * b^-n, (k_j + 1) * b^-n).  Cells at one depth tile space, so
cell masses over a depth-n partition sum exactly to the total mass; the
half-open convention is what makes this a true partition.  The anchor
v(D) = k * b^-n is the corner used by the change-of-measure identity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import SpecValidationError


@dataclass(frozen=True)
class Cell:
    base: int
    depth: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.base < 2:
            raise SpecValidationError("cell base must be >= 2")
        if self.depth < 0:
            raise SpecValidationError("cell depth must be >= 0")
        if not self.index:
            raise SpecValidationError("cell index must have >= 1 coordinate")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return float(self.base) ** (-self.depth)

    def anchor(self) -> np.ndarray:
        """The corner v(D) with D = v(D) + [0, b^-depth)^dim."""
        return np.array(self.index, dtype=float) * self.side

    def upper(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 1.0) * self.side

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.anchor(), self.upper()
        return bool(np.all(lo <= x) and np.all(x < hi))

    def in_unit_cube(self) -> bool:
        return all(0 <= k < self.base ** self.depth for k in self.index)

    def parent(self) -> "Cell":
        if self.depth == 0:
            raise SpecValidationError("depth-0 cell has no parent")
        return Cell(self.base, self.depth - 1,
                    tuple(k // self.base for k in self.index))

    def children(self):
        for offs in itertools.product(range(self.base), repeat=self.dim):
            yield Cell(self.base, self.depth + 1,
                       tuple(self.base * k + o for k, o in zip(self.index, offs)))


def cell_from_point(x, base: int, depth: int) -> Cell:
    """The depth-n cell containing x (componentwise floor)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    scale = base ** depth
    idx = tuple(int(np.floor(xi * scale)) for xi in x)
    return Cell(base, depth, idx)


def unit_cube_cells(base: int, depth: int, dim: int, limit: int = 1 << 22):
    """Iterate all depth-n cells of [0,1)^dim; guarded by a cell-count limit."""
    count = (base ** depth) ** dim
    if count > limit:
        raise SpecValidationError(
            f"refusing to enumerate {count} cells (limit {limit})")
    for idx in itertools.product(range(base ** depth), repeat=dim):
        yield Cell(base, depth, idx)
