"""One runner per experiment kind.  Runners only write through :class:`RunContext`."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from slflab import __version__
from slflab.counterexample import (CounterexampleParams, calibrate_N, default_starts,
                                   run_split_experiment)
from slflab.fields import (CoefficientField, MollifierSpec, field_from_config, localized_norm,
                           mollify)
from slflab.fpe import (GridFunction, degiorgi_sequence, energy_report, gaussian_density,
                        solve_fpe)
from slflab.fpe.io import write_binary, write_csv
from slflab.grid import GridSpec
from slflab.particles import (ParticleEnsemble, StepOptions, coupling_diagnostic, density_histogram,
                              evolve, krylov_scaling, superposition_check)
from slflab.particles.io import write_ensemble_csv, write_path_csv


@dataclass
class RunContext:
    out: Path
    config: dict
    config_hash: str
    seed: int
    threads: int
    outputs: list = field(default_factory=list)
    sidecars: list = field(default_factory=list)
    calibration: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.out / name

    def register(self, name: str, meta: dict | None = None) -> None:
        p = self.path(name)
        side = p.with_name(p.name + ".meta.json")
        body = {"config_hash": self.config_hash, "kind": self.config["kind"], "seed": self.seed,
                "version": __version__, "file": name,
                "sha256": hashlib.sha256(p.read_bytes()).hexdigest(), **(meta or {})}
        side.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.outputs.append(name)
        self.sidecars.append(side.name)

    def write_table(self, name: str, header: list, rows: list, meta: dict | None = None) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.tables[name] = (header, rows)
        self.register(name, meta)

    def write_json(self, name: str, obj: dict, meta: dict | None = None) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.register(name, meta)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# ---------------------------------------------------------------- builders

def build_grid(cfg: dict) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(int(g["d"]), float(g["L"]), float(g["h"]), g.get("dt"), float(g.get("T", 1.0)))


def build_field(cfg: dict) -> CoefficientField:
    block = dict(cfg["field"])
    level = block.pop("mollify", None)
    fld = field_from_config(block)
    if level:
        fld = mollify(fld, MollifierSpec(fld.dim, int(level)))
    return fld


def build_initial(cfg: dict, grid: GridSpec) -> GridFunction:
    init = cfg.get("initial", {"type": "gaussian", "variance": 0.5})
    kind = init.get("type", "gaussian")
    if kind == "gaussian":
        return gaussian_density(grid, float(init.get("variance", 0.5)), init.get("mean"))
    if kind == "uniform-random":
        rng = np.random.default_rng(int(init.get("seed", cfg.get("seed", 0))))
        return GridFunction(grid, rng.uniform(float(init.get("low", 0.0)), float(init.get("high", 1.0)),
                                              grid.shape))
    if kind == "constant":
        return GridFunction(grid, np.full(grid.shape, float(init.get("value", 1.0))))
    raise ValueError(f"unknown initial data type {kind!r}")


def step_options(block: dict) -> StepOptions:
    return StepOptions(taming=block.get("taming", "auto"), substep=bool(block.get("substep", True)),
                       substep_tol=float(block.get("substep_tol", 0.1)))


def _times(block: dict, T: float) -> list:
    if "times" in block:
        return [float(t) for t in block["times"]]
    n = int(block.get("snapshots", 1))
    return [T * (i + 1) / n for i in range(n)]


# ---------------------------------------------------------------- runners

def run_fpe_solve(ctx: RunContext) -> None:
    cfg = ctx.config
    grid = build_grid(cfg)
    fld = build_field(cfg)
    fb = cfg.get("fpe", {})
    phi = build_initial(cfg, grid)
    sol = solve_fpe(fld, phi, grid, form=fb.get("form", "fpe"), times=_times(fb, grid.T),
                    boundary=fb.get("boundary", "no-flux"), cap=bool(fb.get("cap", True)))
    fmt = cfg.get("output", {}).get("snapshots", "csv")
    meta = {"dt": sol.dt, "steps": sol.steps, "capped_faces": sol.capped_faces, "grid": grid.to_dict()}
    for i, snap in enumerate(sol):
        stem = f"snapshot_{i:03d}"
        if fmt in ("csv", "both"):
            write_csv(ctx.path(stem + ".csv"), snap)
            ctx.register(stem + ".csv", {**meta, "t": snap.time})
        if fmt in ("binary", "both"):
            write_binary(ctx.path(stem + ".bin"), snap)
            ctx.register(stem + ".bin", {**meta, "t": snap.time})
    rows = [[s.time, s.mass(), float(s.values.min()), float(s.values.max())] for s in sol]
    ctx.write_table("summary.csv", ["t", "mass", "min", "max"], rows,
                    {**meta, "boundary_outflow": sol.outflow})
    ctx.artifacts["solution"] = sol


def run_mc(ctx: RunContext) -> None:
    cfg = ctx.config
    fld = build_field(cfg)
    pb = cfg["particles"]
    M, dt, T = int(pb["M"]), float(pb.get("dt", 1e-3)), float(pb.get("T", 1.0))
    if "grid" in cfg and pb.get("start") is None:
        grid = build_grid(cfg)
        ens = ParticleEnsemble.from_density(build_initial(cfg, grid), M, ctx.seed)
    else:
        ens = ParticleEnsemble.at_point(pb.get("start", [0.0] * fld.dim), M, ctx.seed)
    record = bool(pb.get("record", False))
    out = evolve(ens, fld, dt, T, record=record, threads=ctx.threads, options=step_options(pb))
    meta = {k: v for k, v in out.stats.items() if k != "wall_time"}
    write_ensemble_csv(ctx.path("ensemble.csv"), out)
    ctx.register("ensemble.csv", meta)
    if record and out.path is not None:
        write_path_csv(ctx.path("paths.csv"), out.path)
        ctx.register("paths.csv", meta)
    if "grid" in cfg:
        rho = density_histogram(out, build_grid(cfg))
        write_csv(ctx.path("density.csv"), rho)
        ctx.register("density.csv", {**meta, "overflow": rho.overflow})
    ctx.artifacts["ensemble"] = out


def run_superposition(ctx: RunContext) -> None:
    cfg = ctx.config
    grid = build_grid(cfg)
    fld = build_field(cfg)
    pb = cfg["particles"]
    rep = superposition_check(fld, build_initial(cfg, grid), grid, int(pb["M"]), float(pb.get("dt", 1e-3)),
                              float(pb.get("T", grid.T)), _times(pb, float(pb.get("T", grid.T))),
                              ctx.seed, ctx.threads, step_options(pb))
    rows = list(zip(rep.times, rep.l1, rep.noise_floor, rep.overflow))
    ctx.write_table("superposition.csv", ["t", "l1", "noise_floor", "overflow"], rows,
                    {"M": int(pb["M"]), "dt": float(pb.get("dt", 1e-3)), **step_options(pb).to_dict()})


def run_coupling(ctx: RunContext) -> None:
    cfg = ctx.config
    pb = cfg["particles"]
    cb = cfg.get("coupling", {})
    fx = build_field(cfg)
    fy = None
    if "level_y" in cb or "level_x" in cb:
        base = field_from_config({k: v for k, v in cfg["field"].items() if k != "mollify"})
        if "level_x" in cb:
            fx = mollify(base, MollifierSpec(base.dim, int(cb["level_x"])))
        if "level_y" in cb:
            fy = mollify(base, MollifierSpec(base.dim, int(cb["level_y"])))
    phi = build_initial(cfg, build_grid(cfg)) if cb.get("common_density") and "grid" in cfg else None
    res = coupling_diagnostic(fx, fy, cb.get("start_x"), cb.get("start_y"), float(cb.get("eps", 0.1)),
                              float(cb.get("R", 5.0)), float(pb.get("dt", 1e-2)), float(pb.get("T", 1.0)),
                              int(pb["M"]), ctx.seed, phi, ctx.threads, step_options(pb))
    ctx.write_table("coupling.csv", ["t", "phi_bar"], list(zip(res.times, res.phi_bar)),
                    {"eps": res.eps, "R": res.R, "exit_fraction": res.exit_fraction,
                     "max_abs_Z": res.max_abs_Z})


def _krylov_f(block: dict) -> Callable:
    kind = block.get("f", "one")
    if kind == "one":
        return lambda t, x: np.ones(x.shape[0])
    if kind == "zero":
        return lambda t, x: np.zeros(x.shape[0])
    r = float(block.get("radius", 1.0))
    return lambda t, x: (np.sum(x * x, axis=1) <= r * r).astype(float)


def run_krylov(ctx: RunContext) -> None:
    cfg = ctx.config
    pb, kb = cfg["particles"], cfg["krylov"]
    fld = build_field(cfg)
    fit = krylov_scaling(fld, _krylov_f(kb), kb["deltas"], int(pb["M"]), pb.get("start"),
                         float(kb.get("t0", 0.0)), float(pb.get("dt", 1e-3)), ctx.seed, ctx.threads,
                         step_options(pb))
    ctx.write_table("krylov.csv", ["delta", "estimate", "se"], list(zip(fit.deltas, fit.estimates, fit.se)),
                    {"theta": fit.theta, "intercept": fit.intercept})
    ctx.calibration["theta"] = fit.theta


def run_counterexample(ctx: RunContext) -> None:
    cb = ctx.config["counterexample"]
    params = CounterexampleParams(
        d=int(cb.get("d", 3)), p=float(cb.get("p", 2.0)), alpha=float(cb.get("alpha", 1.2)),
        N=1.0 if cb.get("N", "calibrate") == "calibrate" else float(cb["N"]),
        kappa=float(cb.get("kappa", 1.3)), sigma=float(cb.get("sigma", 1.0)))
    starts = np.asarray(cb["starts"], dtype=float) if "starts" in cb else default_starts(params.d)
    dt = float(cb.get("dt", 2.0 ** -8))
    opts = step_options(cb)
    cal = None
    if cb.get("N", "calibrate") == "calibrate":
        cal = calibrate_N(params, starts, int(cb.get("pilot_M", 1000)), dt, ctx.seed,
                          threads=ctx.threads, options=opts)
        params = params.with_N(cal.N)
        ctx.calibration["N"] = cal.N
        ctx.calibration["calibration_passed"] = cal.passed
    stats = run_split_experiment(params, starts, int(cb.get("M", 10_000)), dt, float(cb.get("T_max", 10.0)),
                                 ctx.seed, ctx.threads, opts, cal)
    ctx.write_json("split_statistics.json", stats.to_dict(), {"N": params.N, **opts.to_dict()})
    rows = [[s[-1], e, se, er, ps, om] for s, e, se, er, ps, om in
            zip(stats.starts, stats.EF, stats.SE, stats.EF_reflected, stats.p_sigma, stats.omega_rate)]
    ctx.write_table("split_statistics.csv", ["x_d", "EF", "SE", "EF_reflected", "p_sigma", "omega_rate"],
                    rows, {"N": params.N, "slope": stats.slope, "slope_se": stats.slope_se})
    ctx.artifacts["stats"] = stats


def run_norms(ctx: RunContext) -> None:
    cfg = ctx.config
    nb = cfg["norms"]
    fld = build_field(cfg)
    g = cfg["grid"]
    ps = nb["p"] if isinstance(nb["p"], list) else [nb["p"]]
    q = float(nb.get("q", np.inf))
    r = float(nb.get("r", 1.0))
    hs = [float(h) for h in nb.get("refine", [g["h"]])]
    rows = []
    for p in ps:
        prev = None
        for h in hs:
            grid = GridSpec(int(g["d"]), float(g["L"]), h, None, float(g.get("T", 1.0)))
            val = localized_norm(lambda t, x: fld.drift(t, x), float(p), q, r, grid,
                                 int(nb.get("nt", 1)))
            ratio = val / prev if prev else float("nan")
            rows.append([float(p), q, h, val, ratio, bool(np.isfinite(val))])
            prev = val
    ctx.write_table("norms.csv", ["p", "q", "h", "norm", "ratio_to_coarser", "finite"], rows, {"r": r})


def run_degiorgi(ctx: RunContext) -> None:
    cfg = ctx.config
    grid = build_grid(cfg)
    fld = build_field(cfg)
    db = cfg.get("degiorgi", {})
    fb = cfg.get("fpe", {})
    phi = build_initial(cfg, grid)
    sol = solve_fpe(fld, phi, grid, times=_times({"snapshots": db.get("snapshots", 10), **fb}, grid.T),
                    boundary=fb.get("boundary", "no-flux"))
    K0 = float(db.get("K0", max(float(np.max(phi.values)), 1e-300)))
    rep = degiorgi_sequence(sol, K0, float(db.get("N_dg", 1.0)), int(db.get("J", 8)),
                            float(db.get("p", 3.0)), float(db.get("q", 3.0)))
    rows = [[j, k, y] for j, (k, y) in enumerate(zip(rep.levels, rep.y))]
    ctx.write_table("degiorgi.csv", ["j", "k_j", "y_j"], rows,
                    {"K0": K0, "N_dg": rep.N_dg, "vanished": rep.vanished, "vanish_index": rep.vanish_index})
    if "energy_level" in db:
        e = energy_report(sol, float(db["energy_level"]), float(db.get("R", 1.0)), (0.0, grid.T))
        ctx.write_table("energy.csv", ["t", "level_measure"], list(zip(e.times, e.measure_series)),
                        {"k": e.k, "sup_norm": e.sup_norm, "l2_mass": e.l2_mass,
                         "space_time_measure": e.level_measure})


RUNNERS = {
    "fpe-solve": run_fpe_solve,
    "mc-run": run_mc,
    "superposition": run_superposition,
    "coupling": run_coupling,
    "krylov": run_krylov,
    "counterexample": run_counterexample,
    "norms": run_norms,
    "degiorgi": run_degiorgi,
}
