"""CSV output for ensembles and paths."""
from __future__ import annotations

import csv

from slflab.particles.ensemble import ParticleEnsemble, PathRecord


def write_ensemble_csv(path, ens: ParticleEnsemble) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"x{k}" for k in range(ens.d)] + ["weight", "frozen"])
        for i in range(ens.M):
            w.writerow([int(ens.ids[i]), *(repr(float(c)) for c in ens.positions[i]),
                        repr(float(ens.weights[i])), int(ens.frozen[i])])


def write_path_csv(path, rec: PathRecord) -> None:
    """Long format: one row per (particle, time)."""
    d = rec.states.shape[-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "t"] + [f"x{k}" for k in range(d)])
        for i, pid in enumerate(rec.ids):
            for k, t in enumerate(rec.times):
                w.writerow([int(pid), repr(float(t)), *(repr(float(c)) for c in rec.states[i, k])])
