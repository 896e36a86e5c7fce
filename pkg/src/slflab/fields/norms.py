"""Localized mixed Lebesgue norms sup_y || f * chi_r^y ||_{L^q_t L^p_x}."""
from __future__ import annotations

import itertools
from typing import Callable, Union

import numpy as np

from slflab.fields.profiles import CutoffProfile
from slflab.grid import GridSpec

SpaceTimeField = Union[np.ndarray, Callable[[float, np.ndarray], np.ndarray]]


def sample_space_time(f: SpaceTimeField, grid: GridSpec, nt: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``f`` at cell centres and midpoint times; returns (times, values)."""
    times = (np.arange(nt) + 0.5) * grid.T / nt
    if not callable(f):
        vals = np.asarray(f, dtype=float)
        if vals.shape == grid.shape:
            vals = vals[None]
        if vals.shape[1:] != grid.shape:
            raise ValueError(f"sample array shape {vals.shape} does not match grid {grid.shape}")
        times = (np.arange(vals.shape[0]) + 0.5) * grid.T / vals.shape[0]
        return times, vals
    pts = grid.cell_centers()
    vals = np.empty((nt,) + grid.shape)
    for j, t in enumerate(times):
        v = np.asarray(f(t, pts), dtype=float)
        if v.ndim == 2:  # vector field: take the Euclidean length
            v = np.linalg.norm(v, axis=-1)
        vals[j] = v.reshape(grid.shape)
    return times, vals


def lattice_centers(grid: GridSpec, r: float) -> np.ndarray:
    k = int(np.floor(grid.L / r + 1e-12))
    ax = np.arange(-k, k + 1) * r
    return np.array(list(itertools.product(ax, repeat=grid.d)))


def localized_norm(f: SpaceTimeField, p: float, q: float, r: float, grid: GridSpec,
                   nt: int = 1, cutoff: CutoffProfile | None = None) -> float:
    """Discrete localized L^q_t L^p_x norm of ``f`` on the grid.

    The supremum over translates y runs over the lattice r Z^d inside the box,
    which matches the continuum supremum up to a factor 2^(d/p).  ``f`` is an
    array of shape (nt, *grid.shape) (or grid.shape for static fields) or a
    callable (t, points) -> values; vector values are replaced by their
    length.  Any non-finite sample inside a window makes the result +inf.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    cutoff = cutoff or CutoffProfile()
    times, vals = sample_space_time(f, grid, nt)
    absf = np.abs(vals)
    dt = grid.T / absf.shape[0]
    ax = grid.axis()
    h = grid.h
    reach = int(np.ceil(cutoff.outer * r / h)) + 1
    best = 0.0
    for y in lattice_centers(grid, r):
        sl = []
        coords = []
        for k in range(grid.d):
            c = int(np.floor((y[k] + grid.L) / h))
            lo, hi = max(0, c - reach), min(grid.n, c + reach + 1)
            sl.append(slice(lo, hi))
            coords.append(ax[lo:hi] - y[k])
        mesh = np.meshgrid(*coords, indexing="ij")
        rho = np.sqrt(sum(m * m for m in mesh))
        chi = cutoff(rho / r)
        window = absf[(slice(None),) + tuple(sl)] * chi
        if not np.all(np.isfinite(window[:, chi > 0])):
            return float("inf")
        flat = window.reshape(window.shape[0], -1)
        if np.isinf(p):
            space = flat.max(axis=1)
        else:
            space = (np.sum(flat ** p, axis=1) * h ** grid.d) ** (1.0 / p)
        if np.isinf(q):
            val = float(space.max())
        else:
            val = float((np.sum(space ** q) * dt) ** (1.0 / q))
        best = max(best, val)
    return best
