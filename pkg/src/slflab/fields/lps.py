"""Integrability exponents in the subcritical regime d/p + 2/q < 2."""
from __future__ import annotations

from dataclasses import dataclass

from slflab.errors import SubcriticalityViolation


@dataclass(frozen=True)
class LpsExponents:
    d: int
    p: float
    q: float
    e: float
    p_star: float
    q_star: float


_GAP_TOL = 1e-12


def make_lps(d: int, p: float, q: float) -> LpsExponents:
    """Build exponents with gap e = 2 - d/p - 2/q and the dual pair (p*, q*).

    The duals solve 1/p + 2/p* = 1 and 1/q + 2/q* = 1.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if p < 2 or q < 2:
        raise ValueError("p and q must be >= 2")
    e = 2.0 - d / p - 2.0 / q
    # rounding must not let a critical pair through
    if not _GAP_TOL < e < 1.0 - _GAP_TOL:
        raise SubcriticalityViolation(
            f"d/p + 2/q = {d / p + 2.0 / q:g}; need a gap e in (0, 1), got e = {e:g}")
    p_star = 2.0 * p / (p - 1.0)
    q_star = 2.0 * q / (q - 1.0)
    return LpsExponents(d, float(p), float(q), e, p_star, q_star)
