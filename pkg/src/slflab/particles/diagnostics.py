"""Particle-side diagnostics: superposition, occupation scaling, coupling, maximal functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from slflab.errors import DegenerateFit
from slflab.fields.coefficients import CoefficientField
from slflab.fields.mollify import mollify_array
from slflab.fields.profiles import MollifierSpec, smooth_step
from slflab.fpe.solver import GridFunction, solve_fpe
from slflab.grid import GridSpec
from slflab.particles.density import density_histogram, histogram_noise_floor
from slflab.particles.ensemble import ParticleEnsemble
from slflab.particles.evolve import Observer, StepOptions, evolve


# ---------------------------------------------------------------- superposition

@dataclass
class SuperpositionReport:
    times: np.ndarray
    l1: np.ndarray
    noise_floor: np.ndarray
    overflow: np.ndarray


def superposition_check(fld: CoefficientField, phi: GridFunction, grid: Optional[GridSpec] = None,
                        M: int = 100_000, dt: float = 1e-3, T: float = 1.0,
                        times: Optional[Sequence[float]] = None, seed: int = 0, threads: int = 1,
                        options: Optional[StepOptions] = None) -> SuperpositionReport:
    """L1 distance between the particle histogram and the grid solution at ``times``.

    Both engines start from ``phi``; the particle starts are drawn from it
    cell by cell.  Escaped particle weight counts toward the distance.
    The binomial noise floor of the histogram is reported alongside.
    """
    grid = grid or phi.grid
    times = [T] if times is None else sorted(float(t) for t in times)
    sol = solve_fpe(fld, phi, grid, times=times)
    ens = ParticleEnsemble.from_density(phi, M, seed)
    l1, floor, over = [], [], []
    t_prev = 0.0
    for t in times:
        ens = evolve(ens, fld, dt, t - t_prev, threads=threads, options=options)
        t_prev = t
        rho = density_histogram(ens, grid)
        u = sol.at(t)
        l1.append(float(np.sum(np.abs(rho.values - u.values)) * grid.cell_volume + rho.overflow))
        floor.append(histogram_noise_floor(u, M))
        over.append(rho.overflow)
    return SuperpositionReport(np.array(times), np.array(l1), np.array(floor), np.array(over))


# ---------------------------------------------------------------- Krylov estimate

@dataclass
class KrylovFit:
    deltas: np.ndarray
    estimates: np.ndarray
    se: np.ndarray
    theta: float
    intercept: float


class _Occupation(Observer):
    def __init__(self, f, t0, M, n_max, dt):
        self.f, self.t0, self.dt = f, t0, dt
        self.vals = np.zeros((n_max, M))

    def coarse(self, rows, k, t, x, dW):
        self.vals[k, rows] = np.asarray(self.f(t, x), dtype=float)


def krylov_scaling(fld: CoefficientField, f: Callable[[float, np.ndarray], np.ndarray],
                   deltas: Sequence[float], M: int, start=None, t0: float = 0.0,
                   dt: float = 1e-3, seed: int = 0, threads: int = 1,
                   options: Optional[StepOptions] = None) -> KrylovFit:
    """Fit theta in E int_{t0}^{t0+delta} f(t, X_t) dt ~ C delta^theta.

    Each window is rounded to a whole number of steps and integrated with
    right-endpoint sums on the step grid, so f = 1 gives exactly delta.
    """
    start = np.zeros(fld.dim) if start is None else np.asarray(start, dtype=float)
    n = np.array([max(1, int(round(d / dt))) for d in deltas])
    if n.size < 2 or np.unique(n).size < 2:
        raise DegenerateFit("need at least two distinct window lengths")
    ens = ParticleEnsemble.at_point(start, M, seed)
    if t0 > 0:
        ens = evolve(ens, fld, dt, t0, threads=threads, options=options)
    occ = _Occupation(f, t0, M, int(n.max()), dt)
    evolve(ens, fld, dt, n.max() * dt, observers=[occ], threads=threads, options=options)
    cum = np.cumsum(occ.vals, axis=0) * dt
    per = cum[n - 1]
    est = per.mean(axis=1)
    se = per.std(axis=1, ddof=1) / np.sqrt(M) if M > 1 else np.zeros_like(est)
    if np.any(~np.isfinite(est)) or np.any(est <= np.finfo(float).tiny):
        raise DegenerateFit("occupation estimates vanished; log-log slope undefined")
    dl = n * dt
    theta, icpt = np.polyfit(np.log(dl), np.log(est), 1)
    return KrylovFit(dl, est, se, float(theta), float(icpt))


# ---------------------------------------------------------------- pathwise coupling

def phi_eps(s, eps: float) -> np.ndarray:
    """Smooth increasing cap: s on [0, eps/2], eps on [eps, inf)."""
    s = np.asarray(s, dtype=float)
    u = (s - eps / 2) / (eps / 2)
    return np.where(s <= eps / 2, s, np.where(s >= eps, eps, s + (eps - s) * smooth_step(u)))


def Phi_eps(z, eps: float) -> np.ndarray:
    """log(1 + phi_eps(|z|^2) / eps^2) for vectors z (last axis)."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1) if z.ndim else z * z
    return np.log1p(phi_eps(r2, eps) / eps**2)


@dataclass
class CouplingDiagnostics:
    eps: float
    times: np.ndarray
    phi_bar: np.ndarray
    R: float
    exit_fraction: float
    max_abs_Z: float


def coupling_diagnostic(fld_x: CoefficientField, fld_y: Optional[CoefficientField] = None,
                        starts_x=None, starts_y=None, eps: float = 0.1, R: float = 5.0,
                        dt: float = 1e-2, T: float = 1.0, M: int = 1000, seed: int = 0,
                        phi: Optional[GridFunction] = None, threads: int = 1,
                        options: Optional[StepOptions] = None) -> CouplingDiagnostics:
    """Drive two copies with identical noise and average Phi_eps(Z_{t ^ tau_R}).

    Starts are a point or (M, d) array for each copy; with ``phi`` both copies
    start from one common draw of that density.  ``fld_y`` defaults to
    ``fld_x`` (e.g. different starts) and may instead be another mollification
    level of it.  tau_R is the first recorded time both copies lie outside B_R.
    """
    fld_y = fld_y or fld_x
    if phi is not None:
        ex = ParticleEnsemble.from_density(phi, M, seed)
        ey = ex.copy()
    else:
        sx = np.zeros(fld_x.dim) if starts_x is None else np.asarray(starts_x, dtype=float)
        sy = sx if starts_y is None else np.asarray(starts_y, dtype=float)
        ids = np.arange(M, dtype=np.uint64)
        w = np.full(M, 1.0 / M)
        ex = ParticleEnsemble(np.broadcast_to(sx, (M, fld_x.dim)).copy(), w, seed, ids)
        ey = ParticleEnsemble(np.broadcast_to(sy, (M, fld_y.dim)).copy(), w.copy(), seed, ids.copy())
    px = evolve(ex, fld_x, dt, T, record=True, threads=threads, options=options).path
    py = evolve(ey, fld_y, dt, T, record=True, threads=threads, options=options).path
    X, Y = px.states, py.states
    out = (np.linalg.norm(X, axis=-1) > R) & (np.linalg.norm(Y, axis=-1) > R)
    hit = out.any(axis=1)
    k_stop = np.where(hit, out.argmax(axis=1), X.shape[1] - 1)
    Z = X - Y
    k = np.arange(X.shape[1])
    idx = np.minimum(k[None, :], k_stop[:, None])
    Zs = np.take_along_axis(Z, idx[..., None], axis=1)
    phi_bar = Phi_eps(Zs, eps).mean(axis=0)
    return CouplingDiagnostics(eps, px.times, phi_bar, R, float(hit.mean()),
                               float(np.abs(Zs).max()))


# ---------------------------------------------------------------- maximal functions

@dataclass
class MaximalFieldData:
    """``maximal`` lives on the full grid; ``F`` on the interior cropped by ``crop`` cells per face."""

    maximal: np.ndarray
    F: np.ndarray
    crop: int
    h: float
    R: float
    eps: float
    n: int


def _ball_kernel(r_cells: int, d: int) -> np.ndarray:
    off = np.arange(-r_cells, r_cells + 1)
    mesh = np.meshgrid(*([off] * d), indexing="ij")
    return (sum(m * m for m in mesh) <= r_cells * r_cells).astype(float)


def restricted_maximal(values: np.ndarray, h: float, R: float) -> np.ndarray:
    """sup over radii 0, h, ..., R of the average of |f| over cells in the ball.

    Near the box boundary the average runs over cells inside the box.
    """
    a = np.abs(np.asarray(values, dtype=float))
    ones = np.ones_like(a)
    best = a.copy()
    for rc in range(1, int(np.floor(R / h + 1e-9)) + 1):
        ker = _ball_kernel(rc, a.ndim)
        num = ndimage.convolve(a, ker, mode="constant", cval=0.0)
        den = ndimage.convolve(ones, ker, mode="constant", cval=0.0)
        np.maximum(best, num / den, out=best)
    return best


def maximal_field(f: np.ndarray, h: float, R: float, eps: float, n: int) -> MaximalFieldData:
    """M_R |f| and F = M_{2 sqrt(eps)} |grad f_n| + |f - f_n| / eps with f_n = f * rho_n."""
    f = np.asarray(f, dtype=float)
    Mf = restricted_maximal(f, h, R)
    spec = MollifierSpec(f.ndim, n)
    fn = mollify_array(f, h, spec)
    crop = (f.shape[0] - fn.shape[0]) // 2
    inner = f[tuple(slice(crop, s - crop) for s in f.shape)]
    grads = np.gradient(fn, h) if fn.ndim > 1 else [np.gradient(fn, h)]
    gnorm = np.sqrt(sum(g * g for g in grads))
    F = restricted_maximal(gnorm, h, 2.0 * np.sqrt(eps)) + np.abs(inner - fn) / eps
    return MaximalFieldData(Mf, F, crop, h, R, eps, n)
