"""Cell histograms of weighted ensembles on the solver's grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slflab.fpe.solver import GridFunction
from slflab.grid import GridSpec
from slflab.particles.ensemble import ParticleEnsemble


@dataclass
class DensityEstimate(GridFunction):
    """Histogram density plus the weight of particles outside the box."""

    overflow: float = 0.0

    @property
    def total_mass(self) -> float:
        return self.mass() + self.overflow


def density_histogram(ens: ParticleEnsemble, grid: GridSpec) -> DensityEstimate:
    """Weighted cell counts divided by the cell volume; escapees go to ``overflow``."""
    if ens.d != grid.d:
        raise ValueError("ensemble and grid dimensions differ")
    idx, inside = grid.cell_index(ens.positions)
    flat = np.ravel_multi_index(tuple(idx[inside].T), grid.shape)
    counts = np.bincount(flat, weights=ens.weights[inside], minlength=grid.n ** grid.d)
    overflow = float(ens.weights[~inside].sum())
    return DensityEstimate(grid, counts.reshape(grid.shape) / grid.cell_volume, ens.time,
                           True, overflow)


def histogram_noise_floor(u: GridFunction, M: int) -> float:
    """Expected L1 error of an M-sample histogram of the density u.

    Each cell count is binomial with mean M p; for small p the mean
    absolute deviation is close to sqrt(2 p (1 - p) / (pi M)).
    """
    p = np.clip(u.values * u.grid.cell_volume, 0.0, 1.0)
    return float(np.sum(np.sqrt(2.0 * p * (1.0 - p) / (np.pi * M))))
