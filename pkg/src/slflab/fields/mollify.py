"""Convolution with n^d rho(n x) by midpoint quadrature."""
from __future__ import annotations

from dataclasses import replace
from typing import Callable, Optional, Union

import numpy as np
from scipy import ndimage

from slflab.errors import MarginTooSmall
from slflab.fields.coefficients import CoefficientField
from slflab.fields.profiles import MollifierSpec


def _default_quad_h(spec: MollifierSpec) -> float:
    return spec.radius / 6.0


def mollify_array(values: np.ndarray, h: float, spec: MollifierSpec,
                  margin: Optional[float] = None) -> np.ndarray:
    """Mollify samples on a uniform grid and return the interior cells.

    The returned array drops ``ceil(1/(n h))`` cells from every face, i.e.
    exactly the cells whose kernel support lies inside the sampled box.  If
    ``margin`` (the distance between the sampled box and the target region)
    is given and smaller than 1/n, :class:`MarginTooSmall` is raised.
    """
    values = np.asarray(values, dtype=float)
    if margin is not None and margin < spec.radius - 1e-12:
        raise MarginTooSmall(f"margin {margin:g} < mollifier radius {spec.radius:g}")
    offs, w = spec.stencil(h)
    m = int(np.rint(np.abs(offs).max() / h)) if offs.size else 0
    if m == 0:
        return values.copy()
    if any(s <= 2 * m for s in values.shape):
        raise MarginTooSmall("sampled box is narrower than the mollifier support")
    kernel = np.zeros((2 * m + 1,) * values.ndim)
    idx = tuple((np.rint(offs / h).astype(int) + m).T)
    kernel[idx] = w
    out = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    return out[tuple(slice(m, s - m) for s in values.shape)]


def mollify_function(f: Callable, spec: MollifierSpec, quad_h: Optional[float] = None) -> Callable:
    """Pointwise quadrature convolution of a callable f(t, x) or f(x)."""
    offs, w = spec.stencil(quad_h or _default_quad_h(spec))

    def fn(*args):
        *head, x = args
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = None
        for o, wk in zip(offs, w):
            v = np.asarray(f(*head, x - o), dtype=float) * wk
            acc = v if acc is None else acc + v
        return acc

    return fn


def mollify(target: Union[CoefficientField, np.ndarray, Callable], spec: MollifierSpec,
            *, h: Optional[float] = None, margin: Optional[float] = None,
            quad_h: Optional[float] = None):
    """Mollify a coefficient field, a gridded scalar field, or a callable.

    Arrays need the grid spacing ``h``.  For a coefficient field the drift,
    the diffusion matrix and the divergence correction are all convolved, so
    divergence-free drifts stay divergence free and the ellipticity constant
    carries over unchanged.
    """
    if isinstance(target, np.ndarray):
        if h is None:
            raise ValueError("grid spacing h is required to mollify sampled values")
        return mollify_array(target, h, spec, margin)
    if isinstance(target, CoefficientField):
        fld = target
        drift = mollify_function(fld.drift, spec, quad_h)
        sigma = fld.sigma
        if callable(fld.sigma):
            a_n = mollify_function(fld.diffusion_a, spec, quad_h)

            def sigma(t, x, _a=a_n):
                return np.linalg.cholesky(2.0 * _a(t, x))
        div_a = None if fld.div_a is None else mollify_function(fld.div_a, spec, quad_h)
        return replace(fld, drift=drift, sigma=sigma, div_a=div_a,
                       name=f"{fld.name}*rho_{spec.level}", length_scale=None,
                       singular_distance=None, freeze=None,
                       params={**fld.params, "mollifier_level": spec.level})
    if callable(target):
        return mollify_function(target, spec, quad_h)
    raise TypeError(f"cannot mollify object of type {type(target).__name__}")
