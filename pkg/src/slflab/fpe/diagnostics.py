"""Level-set energies, De Giorgi sequences and refinement comparisons on grid solutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from slflab.errors import GridMismatch
from slflab.fields.lps import make_lps
from slflab.fpe.solver import FpeSolution, GridFunction


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    if times.size > 1:
        dt = np.diff(times)
        w[:-1] += dt / 2
        w[1:] += dt / 2
    return w


def _snapshots(u) -> list[GridFunction]:
    return list(u.snapshots if isinstance(u, FpeSolution) else u)


def _ball_mask(grid, R: float, center) -> np.ndarray:
    center = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    r2 = sum((m - c) ** 2 for m, c in zip(grid.mesh(), center))
    return r2 <= R * R


@dataclass
class LevelSetEnergy:
    k: float
    sup_norm: float
    l2_mass: float
    level_measure: float
    gradient_energy: float = 0.0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    measure_series: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def energy(self) -> float:
        """Discrete left side: sup-in-time L^2 mass plus space-time gradient energy."""
        return self.l2_mass + self.gradient_energy


def energy_report(u, k: float, R: float, window: tuple[float, float], center=None) -> LevelSetEnergy:
    """Energies of the truncation (u - k)^+ on [s, t] x B_R(center).

    ``l2_mass`` is the supremum over snapshots of the spatial integral of
    u_k^2, ``level_measure`` the trapezoid-in-time volume of {u > k}, and
    ``measure_series`` the per-snapshot measure of {u > k} in the ball.
    """
    s, t = window
    if not 0 <= s < t:
        raise ValueError("window must satisfy 0 <= s < t")
    snaps = [g for g in _snapshots(u) if s - 1e-12 <= g.time <= t + 1e-12]
    if not snaps:
        raise ValueError("no snapshots inside the window")
    grid = snaps[0].grid
    ball = _ball_mask(grid, R, center)
    vol = grid.cell_volume
    times = np.array([g.time for g in snaps])
    w = _trapezoid_weights(times)
    sup_norm = l2 = grad = 0.0
    series = np.zeros(len(snaps))
    for i, g in enumerate(snaps):
        uk = np.where(ball, np.maximum(g.values - k, 0.0), 0.0)
        sup_norm = max(sup_norm, float(uk.max()))
        l2 = max(l2, float(np.sum(uk * uk) * vol))
        series[i] = np.count_nonzero(uk > 0) * vol
        gsq = 0.0
        for a in range(grid.d):
            gsq = gsq + float(np.sum(np.diff(uk, axis=a) ** 2)) / grid.h**2 * vol
        grad += w[i] * gsq
    measure = float(np.sum(w * series)) if len(snaps) > 1 else 0.0
    return LevelSetEnergy(float(k), sup_norm, l2, measure, grad, times, series)


@dataclass
class DeGiorgiReport:
    K0: float
    N_dg: float
    levels: np.ndarray
    y: np.ndarray
    p_star: float
    q_star: float

    @property
    def vanished(self) -> bool:
        return bool(self.y[-1] == 0.0)

    @property
    def vanish_index(self) -> Optional[int]:
        hits = np.flatnonzero(self.y == 0.0)
        return int(hits[0]) if hits.size else None


def degiorgi_sequence(u, K0: float, N_dg: float, J: int, p: float = 3.0, q: float = 3.0,
                      radius: float = 1.0) -> DeGiorgiReport:
    """y_j = sup_x || 1{u > k_j} ||_{L^{q*}_t L^{p*}_x((0, T] x B_radius(x))}.

    The supremum runs over all cell centres (a ball-count convolution), the
    time integral uses trapezoid weights over snapshots.  The dual exponents
    come from the subcritical pair (p, q).
    """
    if K0 <= 0:
        raise ValueError("K0 must be positive")
    snaps = _snapshots(u)
    grid = snaps[0].grid
    ex = make_lps(grid.d, p, q)
    ps, qs = ex.p_star, ex.q_star
    m = int(np.floor(radius / grid.h))
    off = (np.arange(-m, m + 1) * grid.h)
    mesh = np.meshgrid(*([off] * grid.d), indexing="ij")
    kernel = (sum(x * x for x in mesh) <= radius * radius + 1e-12).astype(float)
    times = np.array([g.time for g in snaps])
    w = _trapezoid_weights(times)
    if len(snaps) == 1:
        w = np.ones(1)
    levels = N_dg * K0 * (2.0 - 2.0 ** -np.arange(J + 1))
    y = np.zeros(J + 1)
    for j, kj in enumerate(levels):
        acc = np.zeros(grid.shape)
        for g, wt in zip(snaps, w):
            ind = (g.values > kj).astype(float)
            if not ind.any():
                continue
            meas = ndimage.convolve(ind, kernel, mode="constant", cval=0.0) * grid.cell_volume
            acc += wt * meas ** (qs / ps)
        y[j] = float(acc.max()) ** (1.0 / qs) if acc.any() else 0.0
    # nested level sets make y nonincreasing; enforce against rounding in the convolution
    y = np.minimum.accumulate(y)
    return DeGiorgiReport(float(K0), float(N_dg), levels, y, ps, qs)


@dataclass
class DecayTrace:
    verdict: str
    trace: np.ndarray
    threshold: float

    @property
    def vanishes(self) -> bool:
        return self.verdict == "vanishes"


def fast_decay_check(y0: float, N: float, C: float, eps: float, steps: int = 64,
                     rel_tol: float = 1e-12) -> DecayTrace:
    """Iterate y_{j+1} = N C^j y_j^(1+eps) and classify the trace.

    The trace vanishes when it ends below ``rel_tol * y0`` (or exactly 0)
    and stalls otherwise, including overflow.
    """
    if N <= 0 or C <= 1 or eps <= 0:
        raise ValueError("need N > 0, C > 1, eps > 0")
    threshold = N ** (-1.0 / eps) * C ** (-1.0 / eps**2)
    trace = [float(y0)]
    y = float(y0)
    with np.errstate(over="ignore"):
        for j in range(steps):
            y = float(N * np.float64(C) ** j * np.float64(y) ** (1.0 + eps))
            trace.append(y)
            if y == 0.0 or not np.isfinite(y):
                break
    last = trace[-1]
    vanish = last == 0.0 or (np.isfinite(last) and last < rel_tol * y0)
    return DecayTrace("vanishes" if vanish else "stalls", np.array(trace), float(threshold))


@dataclass
class StabilityReport:
    levels: list
    max_diff: np.ndarray
    l1_diff: np.ndarray

    @property
    def cauchy(self) -> bool:
        """Consecutive L1 differences are nonincreasing."""
        return bool(np.all(np.diff(self.l1_diff) <= 1e-15))


def stability_compare(runs: Sequence, levels: Optional[Sequence] = None) -> StabilityReport:
    """Max and L1 differences between consecutive mollification levels.

    Each run is an :class:`FpeSolution`; differences are the supremum over
    shared snapshot times.
    """
    runs = list(runs)
    if len(runs) < 2:
        raise ValueError("need at least two runs")
    levels = list(levels) if levels is not None else list(range(len(runs)))
    g0 = runs[0].grid
    t0 = runs[0].times
    for r in runs[1:]:
        if not r.grid.same_as(g0) or r.times.shape != t0.shape or not np.allclose(r.times, t0):
            raise GridMismatch("runs do not share one grid and snapshot schedule")
    mx, l1 = [], []
    for a, b in zip(runs[:-1], runs[1:]):
        diffs = [np.abs(sa.values - sb.values) for sa, sb in zip(a, b)]
        mx.append(max(float(d.max()) for d in diffs))
        l1.append(max(float(d.sum() * g0.cell_volume) for d in diffs))
    return StabilityReport(levels, np.array(mx), np.array(l1))
