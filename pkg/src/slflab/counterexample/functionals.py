"""The odd path functional F, first-passage times and the Hölder noise event.

:class:`SplitTracker` is a streaming observer for the particle stepper: it
integrates F and locates stopping times substep by substep, so a long
horizon never needs the full path in memory.  The batch functions below run
the same tracker over a recorded :class:`PathRecord`, which keeps both
routes on one definition.
"""
from __future__ import annotations

import numpy as np

from slflab.fields.counterexample_drift import CounterexampleParams
from slflab.fields.profiles import g_profile
from slflab.particles.ensemble import PathRecord
from slflab.particles.evolve import Observer

EVENTS = ("tau", "T", "sigma", "sigma_prime")


def f_odd(z) -> np.ndarray:
    """sgn(z) g(z): odd, 0 near the hyperplane, +-1 beyond height 1."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * g_profile(np.abs(z))


def _cone_gap(x) -> np.ndarray:
    # positive inside the unit cone {x_d > r}
    return x[:, -1] - np.linalg.norm(x[:, :-1], axis=-1)


def _crossing(t_a, v_a, t_b, v_b):
    """Time where the linear interpolant from v_a > 0 to v_b <= 0 reaches 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(v_a != v_b, v_a / (v_a - v_b), 1.0)
    return t_a + np.clip(frac, 0.0, 1.0) * (t_b - t_a)


class SplitTracker(Observer):
    """Streams F over [0, T_max], the four stopping times and W on [0, noise_horizon].

    Absent stopping times are NaN.  A condition already met at the start
    gives the time of the first sample.
    """

    def __init__(self, T_max: float = 10.0, noise_horizon: float = 0.0, dt: float | None = None):
        self.T_max = T_max
        self.noise_horizon = noise_horizon
        self.dt = dt

    def begin(self, ens, t0):
        M = ens.M
        self.t0 = t0
        self.F = np.zeros(M)
        self.times = {e: np.full(M, np.nan) for e in EVENTS}
        x0 = ens.positions
        self._set(np.arange(M), _cone_gap(x0) <= 0, "tau", t0)
        self._set(np.arange(M), x0[:, -1] <= 0, "T", t0)
        self._set(np.arange(M), x0[:, -1] >= 2, "sigma", t0)
        if self.noise_horizon > 0:
            if not self.dt:
                raise ValueError("recording noise needs the coarse step")
            K = int(round(self.noise_horizon / self.dt))
            self.W = np.zeros((M, K + 1, ens.d))
            self.K_noise = K

    def _set(self, rows, mask, name, when):
        arr = self.times[name]
        sel = rows[mask & np.isnan(arr[rows])]
        if sel.size:
            arr[sel] = when if np.ndim(when) == 0 else when[mask & np.isnan(arr[rows])]

    def advance(self, rows, t_a, x_a, t_b, x_b):
        # F by the trapezoid rule, clipped at T_max
        c_a = np.minimum(t_a, self.T_max)
        c_b = np.minimum(t_b, self.T_max)
        keep = c_b > c_a
        if keep.any():
            fa = np.exp(-c_a) * f_odd(x_a[:, -1])
            fb = np.exp(-c_b) * f_odd(x_b[:, -1])
            w = c_b - c_a
            self.F[rows[keep]] += (0.5 * w * (fa + fb))[keep]
        # first crossings by linear interpolation
        ga, gb = _cone_gap(x_a), _cone_gap(x_b)
        hit = (ga > 0) & (gb <= 0)
        self._set(rows, hit, "tau", _crossing(t_a, ga, t_b, gb))
        za, zb = x_a[:, -1], x_b[:, -1]
        hit = (za > 0) & (zb <= 0)
        self._set(rows, hit, "T", _crossing(t_a, za, t_b, zb))
        hit = (za < 2) & (zb >= 2)
        self._set(rows, hit, "sigma", _crossing(t_a, 2 - za, t_b, 2 - zb))
        sig = self.times["sigma"][rows]
        hit = (sig < t_b) & (za > 1) & (zb <= 1)
        self._set(rows, hit, "sigma_prime", _crossing(t_a, za - 1, t_b, zb - 1))

    def coarse(self, rows, k, t, x, dW):
        if self.noise_horizon > 0 and k < self.K_noise:
            self.W[rows, k + 1] = self.W[rows, k] + dW

    def feed(self, path: PathRecord) -> "SplitTracker":
        """Run the tracker over the samples of a recorded path."""
        M = path.states.shape[0]

        class _E:
            pass

        e = _E()
        e.M, e.d, e.positions = M, path.states.shape[-1], path.states[:, 0]
        if self.noise_horizon > 0 and not self.dt:
            self.dt = float(path.times[1] - path.times[0])
        self.begin(e, float(path.times[0]))
        rows = np.arange(M)
        for k in range(path.K):
            ta = np.full(M, path.times[k])
            tb = np.full(M, path.times[k + 1])
            self.advance(rows, ta, path.states[:, k], tb, path.states[:, k + 1])
            self.coarse(rows, k, path.times[k + 1], path.states[:, k + 1], path.noise[:, k])
        return self


def path_functional_F(path: PathRecord, T_max: float = 10.0) -> tuple[np.ndarray, float]:
    """Trapezoid value of int_0^T_max e^-t f((w_t)_d) dt per path, and the tail bound e^-T_max."""
    tr = SplitTracker(T_max).feed(path)
    return tr.F, float(np.exp(-T_max))


def detect_stopping_times(path: PathRecord) -> dict:
    """First-passage times tau, T, sigma, sigma' per path (NaN when absent)."""
    return SplitTracker(np.inf).feed(path).times


def omega_N_check(W, params: CounterexampleParams, dt: float | None = None,
                  max_points: int = 4096) -> np.ndarray:
    """Hölder event |W_s - W_t| <= N^(1/(2(1+alpha))) |s - t|^(1/(1+alpha)) on [0, 1].

    ``W`` is a PathRecord (noise increments on [0, 1] are summed) or an array
    of W samples of shape (M, K+1, d) at spacing ``dt``.  All pairs are
    scanned when K + 1 <= max_points, otherwise a dyadic subsample is used.
    """
    if isinstance(W, PathRecord):
        dt = float(W.times[1] - W.times[0])
        K = int(round(1.0 / dt))
        W = W.brownian()[:, :K + 1]
    W = np.asarray(W, dtype=float)
    if W.ndim == 2:
        W = W[None]
    if dt is None:
        raise ValueError("sample spacing dt is required for raw arrays")
    stride = 1
    while (W.shape[1] - 1) // stride + 1 > max_points:
        stride *= 2
    W = W[:, ::stride]
    step = dt * stride
    c = params.holder_constant
    e = 1.0 / (1.0 + params.alpha)
    ok = np.ones(W.shape[0], dtype=bool)
    n = W.shape[1]
    for lag in range(1, n):
        live = np.flatnonzero(ok)
        if not live.size:
            break
        Wl = W[live]
        diff = Wl[:, lag:] - Wl[:, :-lag]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        bound = c * (lag * step) ** e
        ok[live] = np.all(dist <= bound * (1 + 1e-12), axis=1)
    return ok
