"""Uniform cell-centred box grids shared by the PDE and particle engines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Cells of width ``h`` tiling the box [-L, L]^d.

    ``dt`` is the requested time step (``None`` lets the scheme pick the
    largest stable one) and ``T`` the horizon.
    """

    d: int
    L: float
    h: float
    dt: Optional[float] = None
    T: float = 1.0

    def __post_init__(self):
        if self.h <= 0 or self.L <= 0:
            raise ValueError("grid spacing and half-width must be positive")
        n = 2.0 * self.L / self.h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"2L/h = {n} is not an integer cell count")

    @property
    def n(self) -> int:
        return int(round(2.0 * self.L / self.h))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def axis(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij")

    def cell_centers(self) -> np.ndarray:
        """Cell centres as an array of shape (n^d, d) in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def cell_index(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Integer cell indices (M, d) of points and a mask of points inside the box."""
        idx = np.floor((np.asarray(x) + self.L) / self.h).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < self.n), axis=-1)
        return idx, inside

    def same_as(self, other: "GridSpec") -> bool:
        return (self.d, self.L, self.h) == (other.d, other.L, other.h)

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "h": self.h, "dt": self.dt, "T": self.T}
