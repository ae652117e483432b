"""Unit-cell geometry as an ordered axis-aligned rectangle program.

The published drawing of the perforated cell leaves the exact solid/void
layout ambiguous, so the geometry is a first-class, swappable input: an
ordered list of rectangle add/subtract operations painted onto an empty
(void) canvas in cell-local coordinates [0, l] x [0, l].

The shipped default interpretation is a plus-shaped (cross) void of arm
length ``l1`` and arm width ``l2`` centered in the cell, which leaves four
solid corner blocks connected through ligaments of width (l - l1)/2 at the
edge midpoints.  It is connected, has full tetragonal symmetry, and uses
both l1 and l2 as labeled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RectOp", "UnitCellGeometry", "paper_like_cell", "solid_square_cell"]


@dataclass(frozen=True)
class RectOp:
    """One paint operation: add or subtract the axis-aligned rectangle
    [x0, x1] x [y0, y1] (cell-local coordinates, meters)."""

    mode: str  # "add" | "subtract"
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.mode not in ("add", "subtract"):
            raise ValueError(f"unknown rectangle op mode {self.mode!r}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("degenerate rectangle")


@dataclass(frozen=True)
class UnitCellGeometry:
    """Square unit-cell of edge ``l`` with a rectangle shape program."""

    l: float
    l1: float
    l2: float
    shape_program: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (0.0 < self.l2 < self.l1 < self.l):
            raise ValueError("geometry requires 0 < l2 < l1 < l")

    def contains(self, x: float, y: float) -> bool:
        """Solid/void query at a cell-local point (used at element centers;
        exact when all rectangle edges align with the mesh grid)."""
        solid = False
        for op in self.shape_program:
            if op.x0 <= x <= op.x1 and op.y0 <= y <= op.y1:
                solid = op.mode == "add"
        return solid

    def grid_coordinates(self) -> np.ndarray:
        """All rectangle edge coordinates (for representability checks)."""
        coords = []
        for op in self.shape_program:
            coords.extend([op.x0, op.x1, op.y0, op.y1])
        return np.asarray(coords)

    def solid_mask(self, resolution: int) -> np.ndarray:
        """Element solid mask on a resolution x resolution grid of one cell,
        indexed [iy, ix]."""
        h = self.l / resolution
        mask = np.zeros((resolution, resolution), dtype=bool)
        for iy in range(resolution):
            for ix in range(resolution):
                mask[iy, ix] = self.contains((ix + 0.5) * h, (iy + 0.5) * h)
        return mask

    def is_tetragonal(self, resolution: int = 40) -> bool:
        m = self.solid_mask(resolution)
        return (
            np.array_equal(m, m[::-1, :])
            and np.array_equal(m, m[:, ::-1])
            and np.array_equal(m, m.T)
        )


def paper_like_cell(l: float = 1e-3, l1_frac: float = 0.9, l2_frac: float = 0.3) -> UnitCellGeometry:
    """Default cell: solid square with a centered plus-shaped void,
    arm length l1 = l1_frac * l and arm width l2 = l2_frac * l."""
    l1 = l1_frac * l
    l2 = l2_frac * l
    a0 = (l - l1) / 2.0  # arm span start
    b0 = (l - l2) / 2.0  # arm width start
    program = (
        RectOp("add", 0.0, 0.0, l, l),
        RectOp("subtract", a0, b0, l - a0, l - b0),  # horizontal arm
        RectOp("subtract", b0, a0, l - b0, l - a0),  # vertical arm
    )
    return UnitCellGeometry(l=l, l1=l1, l2=l2, shape_program=program)


def solid_square_cell(l: float = 1e-3) -> UnitCellGeometry:
    """Fully solid cell (homogeneous reference)."""
    return UnitCellGeometry(
        l=l, l1=0.9 * l, l2=0.3 * l, shape_program=(RectOp("add", 0.0, 0.0, l, l),)
    )
