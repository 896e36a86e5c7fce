"""Counter-based Gaussian streams (Philox4x64-10, vectorised over counters).

Every random number used by the particle engines is a pure function of
``(seed, tag, counter words)``.  Nothing is carried between calls, so the
draw for particle ``i`` at step ``k`` does not depend on how the ensemble was
chunked or on how many worker threads ran it.

The bijection is bit-identical to :class:`numpy.random.Philox`; the test
suite checks this against numpy's implementation.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_PI = 2.0 * np.pi

# stream tags: keep distinct consumers of one seed independent
TAG_NOISE = 0x4E4F495345  # "NOISE"
TAG_INIT = 0x494E4954  # "INIT"
TAG_PILOT = 0x50494C4F54  # "PILOT"


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full 64x64 -> 128 bit product split into (hi, lo) words."""
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    t = a_lo * b_lo
    u = a_hi * b_lo + (t >> _S32)
    v = a_lo * b_hi + (u & _LO32)
    hi = a_hi * b_hi + (u >> _S32) + (v >> _S32)
    lo = a * b
    return hi, lo


def philox4x64(counter: tuple, key: tuple, rounds: int = 10) -> tuple[np.ndarray, ...]:
    """Apply the Philox4x64 bijection.

    ``counter`` is four broadcastable uint64 arrays, ``key`` two uint64
    scalars.  Returns four uint64 arrays of the broadcast shape.
    """
    with np.errstate(over="ignore"):
        c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
        c0, c1, c2, c3 = c0.copy(), c1.copy(), c2.copy(), c3.copy()
        k0 = np.uint64(key[0])
        k1 = np.uint64(key[1])
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _open_unit(x: np.ndarray) -> np.ndarray:
    # 53-bit mantissa, shifted by half an ulp so 0 and 1 are never produced
    return ((x >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def uniforms(seed: int, tag: int, c0, c1=0, c2=0) -> np.ndarray:
    """Four uniforms in (0, 1) per counter, shape ``broadcast + (4,)``."""
    words = philox4x64((c0, c1, c2, 0), (seed & 0xFFFFFFFFFFFFFFFF, tag))
    return np.stack([_open_unit(w) for w in words], axis=-1)


def normals(seed: int, tag: int, c0, c1=0, c2=0, dim: int = 4) -> np.ndarray:
    """Standard normals, shape ``broadcast(c0, c1, c2) + (dim,)``.

    Each Philox block yields four normals via Box-Muller; dimensions beyond
    four consume further blocks distinguished by the fourth counter word.
    """
    seed = seed & 0xFFFFFFFFFFFFFFFF
    blocks = []
    for blk in range((dim + 3) // 4):
        w0, w1, w2, w3 = philox4x64((c0, c1, c2, blk), (seed, tag))
        u0, u1, u2, u3 = (_open_unit(w) for w in (w0, w1, w2, w3))
        r0 = np.sqrt(-2.0 * np.log(u0))
        r1 = np.sqrt(-2.0 * np.log(u2))
        blocks.extend([r0 * np.cos(_TWO_PI * u1), r0 * np.sin(_TWO_PI * u1),
                       r1 * np.cos(_TWO_PI * u3), r1 * np.sin(_TWO_PI * u3)])
    return np.stack(blocks[:dim], axis=-1)
