"""Optional PNG figures next to the CSV output (needs matplotlib, imported lazily)."""
from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _column(rows, i):
    return np.array([float(r[i]) for r in rows])


def render(ctx) -> list[str]:
    """Draw one figure per table the run produced; returns the file names written."""
    plt = _plt()
    kind = ctx.config["kind"]
    made = []

    def save(fig, name):
        fig.tight_layout()
        fig.savefig(ctx.path(name), dpi=110, metadata={"Software": None})
        plt.close(fig)
        made.append(name)

    sol = ctx.artifacts.get("solution")
    if sol is not None:
        last = sol.snapshots[-1]
        vals = last.values if last.grid.d == 2 else last.values[(last.grid.n // 2,) * (last.grid.d - 2)]
        fig, ax = plt.subplots(figsize=(5, 4))
        L = last.grid.L
        im = ax.imshow(vals.T, origin="lower", extent=(-L, L, -L, L), cmap="viridis")
        fig.colorbar(im, ax=ax)
        ax.set_title(f"u at t = {last.time:g}")
        save(fig, "snapshot_final.png")
    ens = ctx.artifacts.get("ensemble")
    if ens is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(ens.positions[:, 0], ens.positions[:, -1], ",", alpha=0.5)
        ax.set_xlabel("x_1")
        ax.set_ylabel(f"x_{ens.d}")
        save(fig, "ensemble.png")
    tables = ctx.tables
    if "superposition.csv" in tables:
        _, rows = tables["superposition.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(_column(rows, 0), _column(rows, 1), "o-", label="L1 distance")
        ax.plot(_column(rows, 0), _column(rows, 2), "s--", label="histogram noise floor")
        ax.set_xlabel("t")
        ax.legend()
        save(fig, "superposition.png")
    if "krylov.csv" in tables:
        _, rows = tables["krylov.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(_column(rows, 0), _column(rows, 1), "o-")
        ax.set_xlabel("window length")
        ax.set_ylabel("occupation estimate")
        save(fig, "krylov.png")
    if "coupling.csv" in tables:
        _, rows = tables["coupling.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(_column(rows, 0), _column(rows, 1))
        ax.set_xlabel("t")
        ax.set_ylabel("mean Phi_eps(Z)")
        save(fig, "coupling.png")
    if "split_statistics.csv" in tables:
        _, rows = tables["split_statistics.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.errorbar(_column(rows, 0), _column(rows, 1), yerr=3 * _column(rows, 2), fmt="o", label="start")
        ax.errorbar(_column(rows, 0), _column(rows, 3), yerr=3 * _column(rows, 2), fmt="s", label="mirror start")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xscale("log")
        ax.set_xlabel("start height")
        ax.set_ylabel("mean F (3 SE bars)")
        ax.legend()
        save(fig, "split_statistics.png")
    if "norms.csv" in tables:
        _, rows = tables["norms.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        p = _column(rows, 0)
        for pv in np.unique(p):
            sel = [r for r in rows if float(r[0]) == pv]
            ax.loglog(_column(sel, 2), _column(sel, 3), "o-", label=f"p = {pv:g}")
        ax.set_xlabel("h")
        ax.set_ylabel("localized norm")
        ax.legend()
        save(fig, "norms.png")
    if "degiorgi.csv" in tables:
        _, rows = tables["degiorgi.csv"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(_column(rows, 0), _column(rows, 2), "o-")
        ax.set_xlabel("j")
        ax.set_ylabel("y_j")
        save(fig, "degiorgi.png")
    for name in made:
        ctx.register(name, {"figure": True, "kind": kind})
    return made
