"""Calibration of the drift strength and the splitting experiment over cone starts."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from slflab.fields.coefficients import counterexample_field
from slflab.fields.counterexample_drift import CounterexampleParams
from slflab.particles.ensemble import ParticleEnsemble
from slflab.particles.evolve import StepOptions, _noise, evolve
from slflab.particles.rng import TAG_PILOT
from slflab.counterexample.functionals import SplitTracker, omega_N_check
from slflab.counterexample.skeleton import cone_membership

log = logging.getLogger(__name__)

DEFAULT_DT = 2.0 ** -8


def default_starts(d: int = 3, n: int = 5, top: float = 0.05) -> np.ndarray:
    """(0, ..., 0, top 2^-j) for j = 0..n-1."""
    s = np.zeros((n, d))
    s[:, -1] = top * 2.0 ** -np.arange(n)
    return s


def _pilot_seed(seed: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + TAG_PILOT) & 0xFFFFFFFFFFFFFFFF


@dataclass
class PilotResult:
    N: float
    omega_rate: float
    p_sigma: float


@dataclass
class Calibration:
    N: float
    table: list = field(default_factory=list)
    passed: bool = True


def _short_run(params, start, M, dt, seed, id_offset, threads, options, horizon=1.0):
    fld = counterexample_field(params)
    ens = ParticleEnsemble.at_point(start, M, seed, id_offset)
    tr = SplitTracker(T_max=horizon, noise_horizon=1.0, dt=dt)
    evolve(ens, fld, dt, horizon, observers=[tr], threads=threads, options=options)
    return tr


def pilot_noise(d: int, M: int, dt: float, seed: int, id_offset: int = 0,
                horizon: float = 1.0) -> np.ndarray:
    """Coarse Brownian samples on [0, horizon] exactly as the stepper draws them."""
    K = int(round(horizon / dt))
    ids = np.arange(id_offset, id_offset + M, dtype=np.uint64)
    W = np.zeros((M, K + 1, d))
    for k in range(K):
        W[:, k + 1] = W[:, k] + _noise(seed, ids, k, 0, d, None, np.sqrt(dt))
    return W


def calibrate_N(params: CounterexampleParams, starts: Sequence, M: int = 1000, dt: float = DEFAULT_DT,
                seed: int = 0, omega_target: float = 0.5, sigma_target: float = 0.3,
                max_log2: int = 20, threads: int = 1,
                options: Optional[StepOptions] = None) -> Calibration:
    """Smallest N = 2^k with Omega_N frequency >= omega_target and, for every
    start, the frequency of {sigma < 1 ^ tau} >= sigma_target.

    The noise does not depend on N, so the Omega_N frequency of every
    candidate comes from one set of pilot noise paths, and drift pilots only
    run from the first candidate that passes it.  Pilot runs use their own
    noise streams so calibration and measurement never share samples.
    """
    pseed = _pilot_seed(seed)
    starts = np.atleast_2d(starts)
    noise = [pilot_noise(params.d, M, dt, pseed, j * M) for j in range(len(starts))]
    table = []
    for k in range(max_log2 + 1):
        p = params.with_N(float(2 ** k))
        omega = float(min(omega_N_check(W, p, dt).mean() for W in noise))
        row = PilotResult(p.N, omega, float("nan"))
        if omega >= omega_target:
            sig = []
            for j, s in enumerate(starts):
                tr = _short_run(p, s, M, dt, pseed, j * M, threads, options)
                sig.append(_p_sigma(tr))
            row.p_sigma = float(np.min(sig))
        table.append(asdict(row))
        log.info("pilot N=%g: omega=%.3f p_sigma=%.3f", p.N, row.omega_rate, row.p_sigma)
        if omega >= omega_target and row.p_sigma >= sigma_target:
            return Calibration(p.N, table, True)
    return Calibration(float(2 ** max_log2), table, False)


def _p_sigma(tr: SplitTracker) -> float:
    sig, tau = tr.times["sigma"], tr.times["tau"]
    return float(np.mean(_sigma_event(sig, tau)))


def _sigma_event(sig, tau):
    # sigma < 1 ^ tau with absent times read as +inf
    sig = np.where(np.isnan(sig), np.inf, sig)
    tau = np.where(np.isnan(tau), np.inf, tau)
    return sig < np.minimum(1.0, tau)


@dataclass
class SplitStatistics:
    N: float
    starts: np.ndarray
    EF: np.ndarray
    SE: np.ndarray
    EF_reflected: np.ndarray
    antithetic: np.ndarray
    p_sigma: np.ndarray
    p_sigma_prime: np.ndarray
    omega_rate: np.ndarray
    frozen_fraction: np.ndarray
    slope: float
    slope_se: float
    M: int
    dt: float
    T_max: float
    tail_bound: float
    substeps: int = 0
    calibration: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def weighted_slope(x, y, se) -> tuple[float, float]:
    """Weighted least-squares slope of y on x with weights 1/se^2, and its standard error."""
    x, y, se = (np.asarray(a, dtype=float) for a in (x, y, se))
    w = 1.0 / np.maximum(se, np.finfo(float).tiny) ** 2
    A = np.stack([np.ones_like(x), x], axis=1)
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * y))
    return float(beta[1]), float(np.sqrt(cov[1, 1]))


def run_split_experiment(params: CounterexampleParams, starts: Optional[Sequence] = None, M: int = 10_000,
                         dt: float = DEFAULT_DT, T_max: float = 10.0, seed: int = 0,
                         threads: int = 1, options: Optional[StepOptions] = None,
                         calibration: Optional[Calibration] = None) -> SplitStatistics:
    """Estimate E F from each start and from its mirror image driven by mirrored noise.

    Each start gets its own block of substream ids; the mirrored run reuses
    the block with the last noise coordinate negated, so the per-pair
    symmetric estimate vanishes identically.
    """
    starts = default_starts(params.d) if starts is None else np.atleast_2d(np.asarray(starts, dtype=float))
    if params.N > 0 and np.any(starts[:, -1] == 0):
        raise ValueError("starts must lie off the singular hyperplane when N > 0")
    fld = counterexample_field(params)
    n = len(starts)
    EF, SE, EFr, anti = (np.zeros(n) for _ in range(4))
    ps, psp, om, fr = (np.zeros(n) for _ in range(4))
    subs = 0
    for j, s in enumerate(starts):
        ens = ParticleEnsemble.at_point(s, M, seed, j * M)
        tr = SplitTracker(T_max, noise_horizon=1.0, dt=dt)
        out = evolve(ens, fld, dt, T_max, observers=[tr], threads=threads, options=options)
        trr = SplitTracker(T_max)
        evolve(ens.reflect(), fld, dt, T_max, observers=[trr], threads=threads, options=options)
        F, Fr = tr.F, trr.F
        EF[j], EFr[j] = F.mean(), Fr.mean()
        SE[j] = F.std(ddof=1) / np.sqrt(M) if M > 1 else 0.0
        anti[j] = 0.5 * (EF[j] + EFr[j])
        ev = _sigma_event(tr.times["sigma"], tr.times["tau"])
        ps[j] = ev.mean()
        sig = tr.times["sigma"]
        sp = np.where(np.isnan(tr.times["sigma_prime"]), np.inf, tr.times["sigma_prime"])
        stay = ev & (sp > 1.0 + sig)
        psp[j] = stay.sum() / ev.sum() if ev.any() else 0.0
        om[j] = omega_N_check(tr.W, params, dt).mean()
        fr[j] = out.frozen.mean()
        subs += out.stats["substeps"]
        log.info("start %s: EF=%.4f se=%.4f p_sigma=%.3f", s, EF[j], SE[j], ps[j])
    if n >= 2 and np.all(starts[:, -1] > 0) and np.all(SE > 0):
        slope, slope_se = weighted_slope(np.log(starts[:, -1]), EF, SE)
    else:
        slope, slope_se = float("nan"), float("nan")
    return SplitStatistics(params.N, starts, EF, SE, EFr, anti, ps, psp, om, fr, slope, slope_se,
                           M, dt, T_max, float(np.exp(-T_max)), subs,
                           asdict(calibration) if calibration else None)


def starts_in_cone(params: CounterexampleParams, starts) -> np.ndarray:
    """Which starts lie in the cone of aperture kappa and in the unit cylinder."""
    s = np.atleast_2d(starts)
    return cone_membership(s, params.kappa) & (np.abs(s[:, -1]) < 1)
