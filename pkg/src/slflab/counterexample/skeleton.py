"""Cone geometry and the noise-free height ODE y' = N (d-1) y^-alpha."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from slflab.fields.counterexample_drift import CounterexampleParams


def cone_membership(x, k: float) -> np.ndarray:
    """x_d > k |(x_1, ..., x_{d-1})|, vectorised over leading axes."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x[..., :-1], axis=-1)
    return x[..., -1] > k * r


def in_box(x, rho: float) -> np.ndarray:
    """Membership in the cylinder {r < rho, |x_d| < rho}."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x[..., :-1], axis=-1)
    return (r < rho) & (np.abs(x[..., -1]) < rho)


def closed_form_height(params: CounterexampleParams, x_d: float, t) -> np.ndarray:
    a = params.alpha
    return (x_d ** (1 + a) + params.N * (params.d - 1) * (1 + a) * np.asarray(t, dtype=float)) ** (1 / (1 + a))


def skeleton_bracket(params: CounterexampleParams, x_d: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper comparison heights for noise bounded by eps_N x_d."""
    a, e = params.alpha, params.eps_N
    c = params.N * (params.d - 1) * (a + 1) * np.asarray(t, dtype=float)
    lo = (x_d ** (1 + a) + (1 + e) ** (-a) * c) ** (1 / (1 + a))
    hi = (x_d ** (1 + a) + (1 - e) ** (-a) * c) ** (1 / (1 + a)) if e < 1 else np.full_like(lo, np.inf)
    return lo, hi


def sigma_hit_time(params: CounterexampleParams, x_d: float, level: float = 2.0) -> float:
    """Time for the noise-free height to climb from x_d to ``level``."""
    a = params.alpha
    return (level ** (1 + a) - x_d ** (1 + a)) / (params.N * (params.d - 1) * (1 + a))


def growth_factor(params: CounterexampleParams) -> float:
    """y(t_x) / x_d, which depends only on d and alpha."""
    a = params.alpha
    return (1 + (params.d - 1) * (1 + a)) ** (1 / (1 + a))


@dataclass
class SkeletonSolution:
    x_d: float
    times: np.ndarray
    heights: np.ndarray
    exact: np.ndarray
    t_x: float

    @property
    def rel_error(self) -> float:
        return float(np.max(np.abs(self.heights - self.exact) / self.exact))


def skeleton_solve(params: CounterexampleParams, x_d: float, t_end: float | None = None,
                   n_eval: int = 201, rtol: float = 1e-11) -> SkeletonSolution:
    """Integrate the height ODE numerically and pair it with the closed form."""
    if x_d <= 0:
        raise ValueError("start height must be positive")
    t_x = params.t_x(x_d)
    t_end = t_x if t_end is None else float(t_end)
    times = np.linspace(0.0, t_end, n_eval)
    if t_end == 0.0:
        h = np.full(n_eval, float(x_d))
    else:
        k = params.N * (params.d - 1)
        sol = solve_ivp(lambda t, y: k * y ** (-params.alpha), (0.0, t_end), [x_d],
                        t_eval=times, method="DOP853", rtol=rtol, atol=1e-14 * x_d)
        h = sol.y[0]
    return SkeletonSolution(float(x_d), times, h, closed_form_height(params, x_d, times), t_x)
