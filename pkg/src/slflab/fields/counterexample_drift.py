"""The divergence-free drift that breaks weak uniqueness, and its parameters.

For x_d > 0, with r = |(x_1, ..., x_{d-1})| and g the even ramp of
:func:`slflab.fields.profiles.g_profile`,

    b_i = N alpha x_i x_d^(-alpha-1) g(x_d/r) - N x_i x_d^(-alpha) g'(x_d/r) / r
    b_d = N (d-1) x_d^(-alpha) g(x_d/r) - N x_d^(1-alpha) g'(x_d/r) / r

and the lower half-space is filled by mirror reflection: tangential components
are even in x_d, the normal component is odd, so b(Rx) = R b(x) with R the
flip of the last coordinate.  This is the extension that keeps the field
divergence free across the hyperplane and makes reflected starts with
reflected noise produce exactly reflected paths.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from slflab.errors import ParameterGateError, SingularPoint
from slflab.fields.profiles import g_profile, g_profile_deriv


@dataclass(frozen=True)
class CounterexampleParams:
    d: int = 3
    p: float = 2.0
    alpha: float = 1.2
    N: float = 1.0
    kappa: float = 1.3
    sigma: float = 1.0
    check_gates: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.check_gates:
            problems = self.gate_violations()
            if problems:
                raise ParameterGateError("; ".join(problems))

    def gate_violations(self) -> list[str]:
        out = []
        d, p, a, k = self.d, self.p, self.alpha, self.kappa
        if d < 3:
            out.append(f"d = {d} < 3")
        if not d / 2 < p < d:
            out.append(f"p = {p:g} not in (d/2, d) = ({d / 2:g}, {d:g})")
        if not 1.0 < a < d / p:
            out.append(f"α ∉ (1, d/p): alpha = {a:g}, d/p = {d / p:g}")
        if not 1.0 < k < (d - 1) / a:
            out.append(f"κ ∉ (1, (d-1)/α): kappa = {k:g}, (d-1)/alpha = {(d - 1) / a:g}")
        if self.N < 0:
            out.append(f"N = {self.N:g} < 0")
        return out

    @property
    def eps_N(self) -> float:
        if self.N == 0:
            return float("inf")
        return self.N ** (-1.0 / (2.0 * (1.0 + self.alpha)))

    @property
    def holder_constant(self) -> float:
        """N^(1/(2(1+alpha))), the Hölder bound defining Omega_N."""
        return self.N ** (1.0 / (2.0 * (1.0 + self.alpha)))

    def t_x(self, x_d):
        """Skeleton step horizon N^-1 x_d^(1+alpha)."""
        return np.asarray(x_d, dtype=float) ** (1.0 + self.alpha) / self.N

    def with_N(self, N: float) -> "CounterexampleParams":
        return CounterexampleParams(self.d, self.p, self.alpha, N, self.kappa, self.sigma,
                                    self.check_gates)


def counterexample_drift(params: CounterexampleParams, t, x, *, strict: bool = True) -> np.ndarray:
    """Evaluate the drift at points ``x`` of shape (..., d); ``t`` is ignored.

    At the origin the field is singular: with ``strict`` a
    :class:`SingularPoint` is raised, otherwise the entry is NaN so vectorised
    callers can tag it.
    """
    x = np.asarray(x, dtype=float)
    d = params.d
    if x.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got {x.shape[-1]}")
    N, a = params.N, params.alpha
    out = np.zeros_like(x)
    if N == 0:
        return out
    xh = x[..., :-1]
    xd = x[..., -1]
    sgn = np.where(xd < 0, -1.0, 1.0)
    z = np.abs(xd)
    r = np.sqrt(np.sum(xh * xh, axis=-1))

    origin = (z == 0) & (r == 0)
    if strict and np.any(origin):
        raise SingularPoint("counterexample drift is singular at the origin")
    live = z > 0
    axis = live & (r == 0)
    off = live & (r > 0)

    # on the axis g(z/r) -> 1 and g' vanishes (supported on [1/2, 1])
    za = z[axis]
    out[axis, -1] = N * (d - 1) * za ** (-a)

    zo, ro = z[off], r[off]
    s = zo / ro
    g = g_profile(s)
    gp = g_profile_deriv(s)
    zpow = zo ** (-a)
    coef_h = N * a * zpow / zo * g - N * zpow * gp / ro
    out[off, :-1] = coef_h[:, None] * xh[off]
    out[off, -1] = N * (d - 1) * zpow * g - N * zo * zpow * gp / ro

    out[..., -1] *= sgn
    if np.any(origin):
        out[origin] = np.nan
    return out
