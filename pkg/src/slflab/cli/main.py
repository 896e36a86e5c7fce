"""Command line entry point: run, validate, list-fields, list-experiments.

Exit codes: 0 success, 2 configuration problem, 3 engine failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from slflab import __version__
from slflab.cli.config import KINDS, config_hash, load_config, require_valid, validate
from slflab.cli.experiments import RUNNERS, RunContext
from slflab.errors import ConfigInvalid
from slflab.fields.coefficients import BUILTIN_FIELDS

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE = 0, 2, 3
log = logging.getLogger("slflab")


@dataclass
class RunManifest:
    config_hash: str
    version: str
    kind: str
    seed: int
    threads: int
    wall_time: float
    outputs: list
    sidecars: list
    checksums: dict
    calibration: dict = field(default_factory=dict)


def run(cfg: dict, out_dir, threads: int = 1) -> RunManifest:
    """Validate and execute one experiment; write outputs, sidecars and manifest.json."""
    require_valid(cfg)
    out = Path(out_dir or cfg.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    ctx = RunContext(out, cfg, h, int(cfg.get("seed", 0)), int(threads))
    t0 = time.perf_counter()
    RUNNERS[cfg["kind"]](ctx)
    if cfg.get("output", {}).get("figures"):
        from slflab.cli import report

        report.render(ctx)
    wall = time.perf_counter() - t0
    sums = {n: hashlib.sha256((out / n).read_bytes()).hexdigest() for n in ctx.outputs}
    man = RunManifest(h, __version__, cfg["kind"], ctx.seed, ctx.threads, wall, list(ctx.outputs),
                      list(ctx.sidecars), sums, dict(ctx.calibration))
    (out / "manifest.json").write_text(json.dumps(asdict(man), indent=2, sort_keys=True) + "\n")
    return man


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slflab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", type=Path, default=None)
    r.add_argument("--seed", type=int, default=None, help="override the config seed (recorded)")
    r.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    v = sub.add_parser("validate", help="report config problems without running")
    v.add_argument("--config", required=True, type=Path)
    v.add_argument("--seed", type=int, default=None)
    sub.add_parser("list-fields", help="built-in coefficient fields")
    sub.add_parser("list-experiments", help="experiment kinds")
    return ap


def _with_seed(cfg: dict, seed) -> dict:
    if seed is not None:
        cfg = dict(cfg)
        cfg["seed"] = seed
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "list-fields":
        for name, desc in BUILTIN_FIELDS.items():
            print(f"{name}\t{desc}")
        return EXIT_OK
    if args.cmd == "list-experiments":
        for name, desc in KINDS.items():
            print(f"{name}\t{desc}")
        return EXIT_OK
    try:
        cfg = _with_seed(load_config(args.config), args.seed)
    except ConfigInvalid as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd == "validate":
        problems = validate(cfg)
        for d in problems:
            print(d)
        return EXIT_CONFIG if problems else EXIT_OK
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        man = run(cfg, args.out, args.threads)
    except ConfigInvalid as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # engine failures carry the run context
        print(f"engine error in {cfg.get('kind')} run (config {config_hash(cfg)[:12]}): "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_ENGINE
    print(f"wrote {len(man.outputs)} outputs to {args.out or cfg.get('output', {}).get('dir', 'out')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
