"""Tamed Euler-Maruyama stepping with adaptive dyadic substeps.

Each coarse step [t_k, t_k + dt] of particle i owns a Brownian bridge tree:
the total increment and every dyadic midpoint value are pure functions of
(seed, particle id, k, node position).  A particle that needs a finer step
descends the tree, so the driving path is the same Brownian motion whatever
resolution the particle ends up using.  Coupled copies, reflected copies and
repeated runs therefore see one and the same noise.

Refinement picks the level m with |b| h <= tol * ell, where h = dt 2^-m and
ell is the field's local length scale (1 if the field declares none, which
is the plain |b| dt > tol rule).
"""
from __future__ import annotations

import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from slflab.fields.coefficients import CoefficientField
from slflab.particles.ensemble import ParticleEnsemble, PathRecord
from slflab.particles.rng import TAG_NOISE, normals

log = logging.getLogger(__name__)

MAX_LEVEL = 40
_P = 1 << MAX_LEVEL


@dataclass(frozen=True)
class StepOptions:
    """Numerical knobs; all of them are written to run metadata.

    ``taming`` is "auto" (tame only fields with a declared singular locus),
    "on" or "off".  Chunking never changes results, only memory and
    parallel granularity.
    """

    taming: str = "auto"
    substep: bool = True
    substep_tol: float = 0.1
    max_level: int = MAX_LEVEL
    chunk_size: int = 16384

    def tamed(self, fld: CoefficientField) -> bool:
        if self.taming == "auto":
            return fld.singular_distance is not None
        if self.taming not in ("on", "off"):
            raise ValueError("taming must be 'auto', 'on' or 'off'")
        return self.taming == "on"

    def to_dict(self) -> dict:
        return {"taming": self.taming, "substep": self.substep, "substep_tol": self.substep_tol,
                "max_level": self.max_level}


class Observer:
    """Streaming hook; rows are global particle indices, times are per-row arrays."""

    def begin(self, ens: ParticleEnsemble, t0: float) -> None:
        pass

    def advance(self, rows, t_a, x_a, t_b, x_b) -> None:
        pass

    def coarse(self, rows, k: int, t: float, x, dW) -> None:
        pass


class PathRecorder(Observer):
    def __init__(self, K: int, dt: float):
        self.K, self.dt = K, dt

    def begin(self, ens, t0):
        self.t0 = t0
        self.states = np.empty((ens.M, self.K + 1, ens.d))
        self.states[:, 0] = ens.positions
        self.noise = np.zeros((ens.M, self.K, ens.d))
        self.ids = ens.ids.copy()

    def coarse(self, rows, k, t, x, dW):
        self.states[rows, k + 1] = x
        self.noise[rows, k] = dW

    def record(self) -> PathRecord:
        times = self.t0 + self.dt * np.arange(self.K + 1)
        return PathRecord(times, self.states, self.noise, self.ids)


def _levels(fld, b, x, dt, opts: StepOptions) -> np.ndarray:
    if not opts.substep:
        return np.zeros(b.shape[0], dtype=np.int64)
    nb = np.sqrt(np.sum(b * b, axis=-1))
    ell = fld.length_scale(x) if fld.length_scale is not None else 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = nb * dt / (opts.substep_tol * ell)
        lev = np.ceil(np.log2(np.where(ratio > 1.0, ratio, 1.0)))
    lev = np.where(np.isfinite(lev), lev, opts.max_level)
    return np.clip(lev, 0, opts.max_level).astype(np.int64)


def _increment(fld, t, x, b, h, dW, tamed):
    if tamed:
        nb = np.sqrt(np.sum(b * b, axis=-1, keepdims=True))
        h = np.asarray(h, dtype=float).reshape(-1, 1) if np.ndim(h) else h
        drift = h * b / (1.0 + h * nb)
    else:
        drift = (np.asarray(h, dtype=float).reshape(-1, 1) if np.ndim(h) else h) * b
    s = fld.isotropic_sigma
    if s is not None:
        return x + drift + s * dW
    return x + drift + np.einsum("mij,mj->mi", fld.sigma_matrix(t, x), dW)


def _noise(seed, ids, step, node, d, reflected, scale):
    z = normals(seed, TAG_NOISE, ids, np.uint64(step), node, dim=d)
    if reflected is not None and reflected.any():
        z[reflected, -1] *= -1.0
    return scale * z


class _Chunk:
    """Runs every coarse step for one fixed block of particles."""

    def __init__(self, fld, ens, rows, dt, K, opts, observers, stats):
        self.fld, self.rows, self.dt, self.K, self.opts = fld, rows, dt, K, opts
        self.obs = observers
        self.seed = ens.seed
        self.ids = ens.ids[rows]
        self.refl = ens.reflected[rows]
        self.x = ens.positions[rows].copy()
        self.frozen = ens.frozen[rows].copy()
        self.nonfinite = ens.nonfinite[rows].copy()
        self.t0, self.step0 = ens.time, ens.step
        self.tamed = opts.tamed(fld)
        self.noisy = fld.isotropic_sigma != 0.0
        self.stats = stats

    def _check(self, loc, x_old, x_new):
        bad = ~np.all(np.isfinite(x_new), axis=-1)
        if bad.any():
            x_new[bad] = x_old[bad]
            self.nonfinite[loc[bad]] = True
            self.frozen[loc[bad]] = True
        if self.fld.freeze is not None:
            fz = self.fld.freeze(x_new) & ~bad
            self.frozen[loc[fz]] = True
        return x_new

    def run(self):
        d = self.x.shape[1]
        n_sub = 0
        for k in range(self.K):
            t = self.t0 + k * self.dt
            step = self.step0 + k
            act = np.flatnonzero(~self.frozen)
            dW_tot = np.zeros((self.rows.size, d))
            if act.size:
                if self.noisy:
                    dW_tot[act] = _noise(self.seed, self.ids[act], step, 0, d, self.refl[act],
                                         np.sqrt(self.dt))
                xa = self.x[act]
                b = np.asarray(self.fld.drift(t, xa), dtype=float)
                lev = _levels(self.fld, b, xa, self.dt, self.opts)
                easy = lev == 0
                e = act[easy]
                if e.size:
                    xe = _increment(self.fld, t, xa[easy], b[easy], self.dt, dW_tot[e], self.tamed)
                    xe = self._check(e, xa[easy], xe)
                    for o in self.obs:
                        o.advance(self.rows[e], np.full(e.size, t), xa[easy], np.full(e.size, t + self.dt), xe)
                    self.x[e] = xe
                hard = act[~easy]
                if hard.size:
                    n_sub += self._refine(hard, t, step, dW_tot[hard])
            still = np.flatnonzero(self.frozen)
            for o in self.obs:
                if still.size:
                    # frozen particles keep reporting their resting position
                    prev = np.setdiff1d(still, act, assume_unique=True)
                    if prev.size:
                        o.advance(self.rows[prev], np.full(prev.size, t), self.x[prev],
                                  np.full(prev.size, t + self.dt), self.x[prev])
                o.coarse(self.rows, k, t + self.dt, self.x, dW_tot)
        self.stats["substeps"] = self.stats.get("substeps", 0) + n_sub

    def _refine(self, loc, t, step, dW_tot):
        """Walk the bridge tree for particles that need steps finer than dt."""
        H, d = loc.size, self.x.shape[1]
        depth_max = self.opts.max_level + 2
        pos = np.zeros(H, dtype=np.int64)
        Wpos = np.zeros((H, d))
        spos = np.zeros((H, depth_max), dtype=np.int64)
        sW = np.zeros((H, depth_max, d))
        spos[:, 0] = _P
        sW[:, 0] = dW_tot
        depth = np.ones(H, dtype=np.int64)
        x = self.x[loc].copy()
        live = np.arange(H)
        n_steps = 0
        while live.size:
            xi = x[live]
            b = np.asarray(self.fld.drift(t, xi), dtype=float)
            lev = _levels(self.fld, b, xi, self.dt, self.opts)
            size = _P >> lev
            top = depth[live] - 1
            R = spos[live, top]
            length = R - pos[live]
            split = length > size
            sp = live[split]
            if sp.size:
                L = length[split]
                mid = pos[sp] + L // 2
                Wl, Wr = Wpos[sp], sW[sp, depth[sp] - 1]
                scale = np.sqrt(self.dt * (L / _P) / 4.0)[:, None]
                if self.noisy:
                    z = _noise(self.seed, self.ids[loc[sp]], step, mid.astype(np.uint64), d,
                               self.refl[loc[sp]], 1.0)
                    Wm = 0.5 * (Wl + Wr) + scale * z
                else:
                    Wm = np.zeros((sp.size, d))
                spos[sp, depth[sp]] = mid
                sW[sp, depth[sp]] = Wm
                depth[sp] += 1
            go = ~split
            st = live[go]
            if st.size:
                Rst = R[go]
                h = (length[go] / _P) * self.dt
                Wr = sW[st, depth[st] - 1]
                dW = Wr - Wpos[st]
                xa = xi[go]
                ta = t + (pos[st] / _P) * self.dt
                xb = _increment(self.fld, t, xa, b[go], h, dW, self.tamed)
                xb = self._check(loc[st], xa, xb)
                tb = t + (Rst / _P) * self.dt
                for o in self.obs:
                    o.advance(self.rows[loc[st]], ta, xa, tb, xb)
                x[st] = xb
                pos[st] = Rst
                Wpos[st] = Wr
                depth[st] -= 1
                n_steps += st.size
            done = (pos[live] >= _P) | self.frozen[loc[live]]
            stopped = live[done & (pos[live] < _P)]
            if stopped.size:
                # frozen mid-step: rest in place for the remainder of the coarse step
                for o in self.obs:
                    o.advance(self.rows[loc[stopped]], t + (pos[stopped] / _P) * self.dt, x[stopped],
                              np.full(stopped.size, t + self.dt), x[stopped])
            live = live[~done]
        self.x[loc] = x
        return n_steps


def evolve(ens: ParticleEnsemble, fld: CoefficientField, dt: float, T: float,
           record: bool = False, observers: Sequence[Observer] = (), threads: int = 1,
           options: Optional[StepOptions] = None) -> ParticleEnsemble:
    """Advance the ensemble by T with coarse step dt and return a new ensemble.

    The result is bitwise independent of ``threads`` and of the chunk size.
    With ``record`` the coarse-grid path is attached as ``result.path``.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    if ens.d != fld.dim:
        raise ValueError(f"ensemble dimension {ens.d} != field dimension {fld.dim}")
    opts = options or StepOptions()
    K = int(np.ceil(T / dt - 1e-9))
    dt_eff = T / K if K else dt
    obs = list(observers)
    recorder = PathRecorder(K, dt_eff) if record and K else None
    if recorder:
        obs.append(recorder)
    for o in obs:
        o.begin(ens, ens.time)
    wall = _time.perf_counter()
    cs = max(1, int(opts.chunk_size))
    chunks, chunk_stats = [], []
    for lo in range(0, ens.M, cs):
        st = {}
        chunks.append(_Chunk(fld, ens, np.arange(lo, min(lo + cs, ens.M)), dt_eff, K, opts, obs, st))
        chunk_stats.append(st)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda c: c.run(), chunks))
    else:
        for c in chunks:
            c.run()
    out = ens.copy()
    for c in chunks:
        out.positions[c.rows] = c.x
        out.frozen[c.rows] = c.frozen
        out.nonfinite[c.rows] = c.nonfinite
    out.time = ens.time + K * dt_eff
    out.step = ens.step + K
    out.path = recorder.record() if recorder else None
    out.stats = {
        **opts.to_dict(), "tamed": opts.tamed(fld), "dt": dt_eff, "steps": K, "M": ens.M,
        "seed": ens.seed, "substeps": int(sum(s.get("substeps", 0) for s in chunk_stats)),
        "frozen": int(out.frozen.sum()), "nonfinite": int(out.nonfinite.sum()),
        "wall_time": _time.perf_counter() - wall,
    }
    if out.stats["nonfinite"]:
        log.warning("%d particles hit non-finite positions and were frozen", out.stats["nonfinite"])
    return out
