"""Uniform cell-centred grid, field containers and reductions.

Fields are plain ``numpy`` arrays of shape ``(ny, nx)``: row ``j`` holds the
cells with y-index ``j`` and x runs fastest, which is also the CSV layout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Grid2D",
    "SimState",
    "cell_center",
    "integrate",
    "neumann_neighbor",
    "field_stats",
    "DIRECTIONS",
    "NonFiniteError",
]

DIRECTIONS = {"+x": (1, 0), "-x": (-1, 0), "+y": (0, 1), "-y": (0, -1)}


class NonFiniteError(ValueError):
    """A field picked up NaN or infinite values."""


@dataclass(frozen=True)
class Grid2D:
    """Square-cell mesh on ``[xmin, xmax] x [ymin, ymax]``."""

    nx: int = 128
    ny: int = 128
    xmin: float = -2.0
    xmax: float = 2.0
    ymin: float = -2.0
    ymax: float = 2.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need at least 2 cells per direction, got {self.nx}x{self.ny}")
        hx = (self.xmax - self.xmin) / self.nx
        hy = (self.ymax - self.ymin) / self.ny
        if hx <= 0 or abs(hx - hy) > 1e-12 * hx:
            raise ValueError(f"cells must be square: hx={hx!r}, hy={hy!r}")

    @classmethod
    def square(cls, n: int, lo: float = -2.0, hi: float = 2.0) -> "Grid2D":
        return cls(n, n, lo, hi, lo, hi)

    @property
    def h(self) -> float:
        return (self.xmax - self.xmin) / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of cell-centre coordinates, shape ``(ny, nx)``."""
        x = self.xmin + (np.arange(self.nx) + 0.5) * self.h
        y = self.ymin + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="xy")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check_field(self, values, name: str = "field") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.size != self.size:
            raise ValueError(f"{name}: expected {self.size} values, got {arr.size}")
        arr = arr.reshape(self.shape)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{name}: non-finite values")
        return arr


@dataclass
class SimState:
    """All species at one time instant. ``h`` (acidity) is present only in the acidity model."""

    grid: Grid2D
    m: np.ndarray
    p: np.ndarray
    v: np.ndarray
    h: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        self.m = self.grid.check_field(self.m, "m")
        self.p = self.grid.check_field(self.p, "p")
        self.v = self.grid.check_field(self.v, "v")
        if self.h is not None:
            self.h = self.grid.check_field(self.h, "h")

    @property
    def species(self) -> tuple[str, ...]:
        return ("m", "p", "v", "h") if self.h is not None else ("m", "p", "v")

    def fields(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.species}

    def copy(self) -> "SimState":
        return SimState(self.grid, self.m.copy(), self.p.copy(), self.v.copy(),
                        None if self.h is None else self.h.copy(), self.t)

    def replace(self, t: Optional[float] = None, **fields) -> "SimState":
        """New state with some fields swapped out (arrays are not copied)."""
        kw = self.fields()
        kw.update(fields)
        return SimState(self.grid, kw["m"], kw["p"], kw["v"], kw.get("h"),
                        self.t if t is None else t)


def cell_center(grid: Grid2D, i: int, j: int) -> tuple[float, float]:
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise IndexError(f"cell ({i}, {j}) outside {grid.nx}x{grid.ny} grid")
    return grid.xmin + (i + 0.5) * grid.h, grid.ymin + (j + 0.5) * grid.h


def integrate(grid: Grid2D, f: np.ndarray) -> float:
    """Cell-sum quadrature ``h^2 * sum(f)``.

    Summation runs sequentially in storage order so the result does not depend
    on how numpy would block a pairwise reduction.
    """
    flat = np.ascontiguousarray(f, dtype=float).ravel()
    return grid.h ** 2 * float(np.add.accumulate(flat)[-1])


def neumann_neighbor(grid: Grid2D, f: np.ndarray, i: int, j: int, direction: str) -> float:
    """Neighbour value with zero-gradient mirroring across the domain boundary."""
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise IndexError(f"cell ({i}, {j}) outside {grid.nx}x{grid.ny} grid")
    di, dj = DIRECTIONS[direction]
    ii, jj = i + di, j + dj
    if not (0 <= ii < grid.nx and 0 <= jj < grid.ny):
        ii, jj = i, j
    return float(f[jj, ii])


def field_stats(grid: Grid2D, f: np.ndarray) -> tuple[float, float, float]:
    return float(np.min(f)), float(np.max(f)), integrate(grid, f)
