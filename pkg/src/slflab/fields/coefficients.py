"""Coefficient fields (drift, diffusion, derived drift V) and named built-ins.

All callables are vectorised: they take a time ``t`` (scalar) and points
``x`` of shape (M, d) and return arrays with a leading M axis.  Fields hold no
mutable state, so one instance can be shared by any number of threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from slflab.fields.counterexample_drift import CounterexampleParams, counterexample_drift
from slflab.fields.profiles import smooth_step

VectorFn = Callable[[float, np.ndarray], np.ndarray]
ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    """Drift b, diffusion a = sigma sigma^T / 2 and derived drift V = b - div a.

    ``sigma`` may be a float s (meaning sigma = s I) or a callable returning
    (M, d, d) matrices.  ``length_scale`` gives the local scale over which the
    drift varies; the particle stepper refines its step when |b| dt exceeds a
    fraction of it.  ``singular_distance`` measures distance to the singular
    locus and drives the grid cap.  ``freeze`` flags points where trajectories
    can no longer be resolved.
    """

    dim: int
    drift: VectorFn
    sigma: object = 1.0
    lam: float = 1.0
    divergence_free: bool = False
    singular_locus: str = ""
    name: str = "custom"
    params: dict = field(default_factory=dict)
    div_a: Optional[VectorFn] = None
    length_scale: Optional[ScalarFn] = None
    singular_distance: Optional[ScalarFn] = None
    freeze: Optional[ScalarFn] = None
    time_dependent: bool = False

    def sigma_matrix(self, t, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if callable(self.sigma):
            return np.asarray(self.sigma(t, x), dtype=float)
        eye = np.eye(self.dim) * float(self.sigma)
        return np.broadcast_to(eye, (x.shape[0], self.dim, self.dim))

    @property
    def isotropic_sigma(self) -> Optional[float]:
        return None if callable(self.sigma) else float(self.sigma)

    def diffusion_a(self, t, x) -> np.ndarray:
        s = self.sigma_matrix(t, x)
        return 0.5 * np.einsum("mik,mjk->mij", s, s)

    def V(self, t, x) -> np.ndarray:
        b = np.asarray(self.drift(t, np.atleast_2d(x)), dtype=float)
        if self.div_a is None:
            return b
        return b - np.asarray(self.div_a(t, np.atleast_2d(x)), dtype=float)

    def with_drift(self, drift: VectorFn, **changes) -> "CoefficientField":
        return replace(self, drift=drift, **changes)


def _diffusion_to_sigma(diffusion: float) -> float:
    return float(np.sqrt(2.0 * diffusion))


def _lam(diffusion: float) -> float:
    # a = D I satisfies the two-sided bound with lam = max(D, 1/D)
    return max(diffusion, 1.0 / diffusion) if diffusion > 0 else 1.0


def constant_field(dim: int = 2, c=None, diffusion: float = 1.0) -> CoefficientField:
    c = np.zeros(dim) if c is None else np.asarray(c, dtype=float)
    if c.shape != (dim,):
        raise ValueError("constant drift must have one entry per dimension")

    def drift(t, x):
        return np.broadcast_to(c, np.shape(x)).copy()

    return CoefficientField(dim, drift, _diffusion_to_sigma(diffusion), lam=_lam(diffusion),
                            divergence_free=True, name="constant",
                            params={"c": c.tolist(), "diffusion": diffusion})


def rotation_field(dim: int = 2, omega: float = 1.0, diffusion: float = 1.0) -> CoefficientField:
    """Rigid rotation omega (-x_2, x_1, 0, ...) in the first coordinate plane."""

    def drift(t, x):
        out = np.zeros_like(x, dtype=float)
        out[:, 0] = -omega * x[:, 1]
        out[:, 1] = omega * x[:, 0]
        return out

    return CoefficientField(dim, drift, _diffusion_to_sigma(diffusion), lam=_lam(diffusion),
                            divergence_free=True, name="rotation",
                            params={"omega": omega, "diffusion": diffusion})


def ou_field(dim: int = 2, theta: float = 1.0, diffusion: float = 1.0) -> CoefficientField:
    """Linear restoring drift -theta x (Ornstein-Uhlenbeck)."""

    def drift(t, x):
        return -theta * np.asarray(x, dtype=float)

    return CoefficientField(dim, drift, _diffusion_to_sigma(diffusion), lam=_lam(diffusion),
                            divergence_free=theta == 0, name="ou-linear",
                            params={"theta": theta, "diffusion": diffusion})


def counterexample_field(params: CounterexampleParams) -> CoefficientField:
    """The mirror-symmetric singular drift with sigma = params.sigma * I."""

    def drift(t, x):
        return counterexample_drift(params, t, x, strict=False)

    def length_scale(x):
        return np.abs(x[:, -1])

    def singular_distance(x):
        return np.linalg.norm(x, axis=-1)

    def freeze(x):
        if params.N == 0:
            return np.zeros(x.shape[0], dtype=bool)
        return np.abs(x[:, -1]) < 1e-8

    s = params.sigma
    lam = 1.0 if s == 0 else max(s * s / 2.0, 2.0 / (s * s))
    return CoefficientField(params.d, drift, s, lam=lam, divergence_free=True,
                            singular_locus="origin (support of the drift hugs the x_d axis)",
                            name="counterexample",
                            params={"d": params.d, "p": params.p, "alpha": params.alpha,
                                    "N": params.N, "kappa": params.kappa, "sigma": s},
                            length_scale=length_scale, singular_distance=singular_distance,
                            freeze=freeze)


def restrict_away_from_hyperplane(fld: CoefficientField, width: float,
                                  ramp: float | None = None) -> CoefficientField:
    """Multiply the drift by a smooth ramp vanishing on |x_d| <= width."""
    ramp = width / 2.0 if ramp is None else ramp

    def drift(t, x):
        w = smooth_step((np.abs(x[:, -1]) - width) / ramp)
        return fld.drift(t, x) * w[:, None]

    return replace(fld, drift=drift, divergence_free=False, singular_locus="",
                   name=f"{fld.name}|restricted", length_scale=None,
                   singular_distance=None, freeze=None,
                   params={**fld.params, "restrict_width": width, "restrict_ramp": ramp})


BUILTIN_FIELDS = {
    "constant": "constant drift c with diffusion D I (c = 0 gives the heat equation)",
    "rotation": "rigid rotation omega (-x2, x1) with diffusion D I",
    "ou-linear": "restoring drift -theta x with diffusion D I",
    "counterexample": "divergence-free singular drift with cone geometry (d >= 3), sigma = I",
}


def field_from_config(block: dict) -> CoefficientField:
    """Build a field from a parsed config block ``{"name": ..., <params>}``."""
    block = dict(block)
    name = block.pop("name", None)
    dim = int(block.pop("dim", 2))
    restrict = block.pop("restrict_width", None)
    if name == "constant":
        fld = constant_field(dim, block.get("c"), float(block.get("diffusion", 1.0)))
    elif name == "rotation":
        fld = rotation_field(dim, float(block.get("omega", 1.0)), float(block.get("diffusion", 1.0)))
    elif name == "ou-linear":
        fld = ou_field(dim, float(block.get("theta", 1.0)), float(block.get("diffusion", 1.0)))
    elif name == "counterexample":
        params = CounterexampleParams(
            d=int(block.get("d", dim if dim >= 3 else 3)), p=float(block.get("p", 2.0)),
            alpha=float(block.get("alpha", 1.2)), N=float(block.get("N", 1.0)),
            kappa=float(block.get("kappa", 1.3)), sigma=float(block.get("sigma", 1.0)))
        fld = counterexample_field(params)
    else:
        raise KeyError(f"unknown field {name!r}; known: {', '.join(BUILTIN_FIELDS)}")
    if restrict is not None:
        fld = restrict_away_from_hyperplane(fld, float(restrict))
    return fld


def probe_ellipticity(fld: CoefficientField, points: np.ndarray, rng: np.random.Generator,
                      t: float = 0.0, n_dirs: int = 8) -> bool:
    """Check lam^-1 |xi|^2 <= a xi.xi <= lam |xi|^2 at sampled points and directions."""
    a = fld.diffusion_a(t, points)
    xi = rng.standard_normal((points.shape[0], n_dirs, fld.dim))
    quad = np.einsum("mki,mij,mkj->mk", xi, a, xi)
    norm2 = np.sum(xi * xi, axis=-1)
    tol = 1e-12 * norm2
    return bool(np.all(quad >= norm2 / fld.lam - tol) and np.all(quad <= fld.lam * norm2 + tol))


def probe_divergence(fld: CoefficientField, points: np.ndarray, h: float = 1e-5, t: float = 0.0) -> np.ndarray:
    """Fourth-order central-difference divergence of the drift at ``points``.

    Second order is too coarse inside the steep transition of the angular
    profile, where truncation dominates the residual.
    """
    div = np.zeros(points.shape[0])
    for k in range(fld.dim):
        e = np.zeros(fld.dim)
        e[k] = h

        def comp(s):
            return fld.drift(t, points + s * e)[:, k]

        div += (-comp(2) + 8 * comp(1) - 8 * comp(-1) + comp(-2)) / (12 * h)
    return div
