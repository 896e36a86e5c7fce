"""Weighted particle ensembles and recorded paths."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from slflab.grid import GridSpec
from slflab.particles.rng import TAG_INIT, uniforms


@dataclass
class PathRecord:
    """States at the coarse time grid and the coarse noise increments between them.

    ``states`` has shape (M, K+1, d) and ``noise`` (M, K, d); row i of both
    belongs to particle ``ids[i]``.
    """

    times: np.ndarray
    states: np.ndarray
    noise: np.ndarray
    ids: np.ndarray
    events: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.size < 2:
            raise ValueError("a path needs at least one step")
        K = self.times.size - 1
        if self.states.shape[1] != K + 1 or self.noise.shape[1] != K:
            raise ValueError("state and noise arrays are not aligned with the time grid")

    @property
    def K(self) -> int:
        return self.times.size - 1

    def brownian(self) -> np.ndarray:
        """Cumulative noise W at the coarse times, shape (M, K+1, d), W_0 = 0."""
        M, K, d = self.noise.shape
        W = np.zeros((M, K + 1, d))
        np.cumsum(self.noise, axis=1, out=W[:, 1:])
        return W

    def reflect(self) -> "PathRecord":
        """Mirror image in the last coordinate (states and noise)."""
        s = self.states.copy()
        s[..., -1] *= -1
        w = self.noise.copy()
        w[..., -1] *= -1
        return replace(self, states=s, noise=w, events=dict(self.events))

    def particle(self, i: int) -> "PathRecord":
        return PathRecord(self.times, self.states[i:i + 1], self.noise[i:i + 1], self.ids[i:i + 1])


@dataclass
class ParticleEnsemble:
    """M weighted particles with their own noise substreams.

    ``ids`` select the substream of each particle; ``reflected`` particles
    see their last noise coordinate negated, which makes a reflected start
    driven by reflected noise the exact mirror image of the original.
    """

    positions: np.ndarray
    weights: np.ndarray
    seed: int
    ids: np.ndarray
    time: float = 0.0
    step: int = 0
    reflected: Optional[np.ndarray] = None
    frozen: Optional[np.ndarray] = None
    nonfinite: Optional[np.ndarray] = None
    path: Optional[PathRecord] = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        M = self.positions.shape[0]
        self.weights = np.asarray(self.weights, dtype=float)
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        if self.weights.shape != (M,) or self.ids.shape != (M,):
            raise ValueError("weights and ids need one entry per particle")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if np.unique(self.ids).size != M:
            raise ValueError("substream ids must be unique")
        for name in ("reflected", "frozen", "nonfinite"):
            v = getattr(self, name)
            setattr(self, name, np.zeros(M, dtype=bool) if v is None else np.asarray(v, dtype=bool))

    @property
    def M(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def at_point(cls, x, M: int, seed: int, id_offset: int = 0) -> "ParticleEnsemble":
        x = np.asarray(x, dtype=float)
        return cls(np.tile(x, (M, 1)), np.full(M, 1.0 / M), seed,
                   np.arange(id_offset, id_offset + M, dtype=np.uint64))

    @classmethod
    def from_density(cls, phi, M: int, seed: int, id_offset: int = 0) -> "ParticleEnsemble":
        """Draw starts from a gridded density: pick a cell by mass, then a uniform point in it."""
        grid: GridSpec = phi.grid
        mass = np.clip(phi.values.ravel(), 0.0, None)
        cdf = np.cumsum(mass)
        if cdf[-1] <= 0:
            raise ValueError("initial density has no mass")
        cdf /= cdf[-1]
        ids = np.arange(id_offset, id_offset + M, dtype=np.uint64)
        u = uniforms(seed, TAG_INIT, ids, 0)
        extra = uniforms(seed, TAG_INIT, ids, 1) if grid.d > 3 else None
        cell = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), cdf.size - 1)
        idx = np.stack(np.unravel_index(cell, grid.shape), axis=-1)
        frac = u[:, 1:4] if extra is None else np.concatenate([u[:, 1:4], extra], axis=1)
        pos = -grid.L + (idx + frac[:, :grid.d]) * grid.h
        return cls(pos, np.full(M, 1.0 / M), seed, ids)

    def reflect(self) -> "ParticleEnsemble":
        """Mirror starts in x_d and flip the noise reflection flag (same substreams)."""
        pos = self.positions.copy()
        pos[:, -1] *= -1
        return ParticleEnsemble(pos, self.weights.copy(), self.seed, self.ids.copy(), self.time,
                                self.step, ~self.reflected, self.frozen.copy(), self.nonfinite.copy())

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions.copy(), self.weights.copy(), self.seed, self.ids.copy(),
                                self.time, self.step, self.reflected.copy(), self.frozen.copy(),
                                self.nonfinite.copy(), None, dict(self.stats))
