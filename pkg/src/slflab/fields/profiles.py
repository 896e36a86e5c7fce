"""Smooth ramps, cutoffs and mollifier bumps built from one C-infinity ramp."""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy import integrate


def _e(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _de(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / (tp * tp)
    return out


def smooth_step(t):
    """S(t) = E(t) / (E(t) + E(1 - t)) with E(t) = exp(-1/t) for t > 0, else 0.

    S is 0 on (-inf, 0], 1 on [1, inf) and strictly increasing in between.
    """
    t = np.asarray(t, dtype=float)
    a = _e(t)
    b = _e(1.0 - t)
    return a / (a + b)


def smooth_step_deriv(t):
    t = np.asarray(t, dtype=float)
    a = _e(t)
    b = _e(1.0 - t)
    da = _de(t)
    db = _de(1.0 - t)
    # d/dt [a/(a+b)] with b' = -E'(1-t)
    return (da * b + a * db) / (a + b) ** 2


def g_profile(s):
    """Even ramp: 0 for |s| <= 1/2, 1 for |s| >= 1, nondecreasing in |s|."""
    return smooth_step(2.0 * (np.abs(s) - 0.5))


def g_profile_deriv(s):
    s = np.asarray(s, dtype=float)
    return 2.0 * np.sign(s) * smooth_step_deriv(2.0 * (np.abs(s) - 0.5))


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff with value 1 on [0, inner] and 0 on [outer, inf)."""

    inner: float = 1.0
    outer: float = 2.0

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        return 1.0 - smooth_step((rho - self.inner) / (self.outer - self.inner))

    def at(self, x, r: float = 1.0, center=None):
        """chi_r^y(x) = chi(|x - y| / r) for points ``x`` of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if center is not None:
            x = x - np.asarray(center, dtype=float)
        return self(np.linalg.norm(x, axis=-1) / r)


def _bump_raw(rho):
    rho = np.asarray(rho, dtype=float)
    return smooth_step(2.0 * (1.0 - rho))  # 1 on [0, 1/2], 0 beyond 1


def _bump_mass(d: int) -> float:
    sphere = 2.0 * pi ** (d / 2) / gamma(d / 2)
    val, _ = integrate.quad(lambda r: float(_bump_raw(r)) * r ** (d - 1), 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13, points=[0.5])
    return sphere * val


@dataclass(frozen=True)
class MollifierSpec:
    """Radial bump supported in the unit ball, rescaled as n^d rho(n x)."""

    dim: int
    level: int

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("mollifier level must be a positive integer")

    @property
    def radius(self) -> float:
        return 1.0 / self.level

    @property
    def mass(self) -> float:
        return _bump_mass(self.dim)

    def base(self, x):
        x = np.asarray(x, dtype=float)
        return _bump_raw(np.linalg.norm(x, axis=-1)) / self.mass

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = float(self.level)
        return n ** self.dim * self.base(n * x)

    def stencil(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint-rule offsets and weights at spacing ``h``.

        Weights are renormalised to sum to one so the discrete convolution is
        an exact convex combination: constants are reproduced, sup norms and
        ellipticity bounds cannot grow, and the symmetric offset set keeps
        affine fields fixed.
        """
        r = self.radius
        m = int(np.floor(r / h))
        ax = np.arange(-m, m + 1) * h
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        offs = np.stack([g.ravel() for g in grids], axis=-1)
        w = self(offs)
        keep = w > 0
        if not np.any(keep):
            return np.zeros((1, self.dim)), np.ones(1)
        offs, w = offs[keep], w[keep]
        return offs, w / w.sum()
