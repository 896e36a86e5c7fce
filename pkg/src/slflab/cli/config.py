"""Experiment configuration: TOML loading, canonical hashing and validation."""
from __future__ import annotations

import copy
import hashlib
import json

try:
    import tomllib as tomli
except ImportError:  # Python < 3.11
    import tomli

from slflab.errors import ConfigInvalid
from slflab.fields.coefficients import BUILTIN_FIELDS
from slflab.fields.counterexample_drift import CounterexampleParams

KINDS = {
    "fpe-solve": "grid solve of the Fokker-Planck or Kolmogorov form with snapshots",
    "mc-run": "particle ensemble evolved from a point or a gridded density",
    "superposition": "L1 distance between particle histogram and grid solution over time",
    "coupling": "two copies under identical noise; mean Phi_eps of their difference",
    "krylov": "occupation integrals over short windows and their log-log slope",
    "counterexample": "calibrated splitting experiment with the singular cone drift",
    "norms": "localized mixed norms of a field over exponents and grid refinements",
    "degiorgi": "De Giorgi level sequence of a grid solution",
}

REQUIRED = {
    "fpe-solve": ("field", "grid"),
    "mc-run": ("field", "particles"),
    "superposition": ("field", "grid", "particles"),
    "coupling": ("field", "particles"),
    "krylov": ("field", "particles", "krylov"),
    "counterexample": ("counterexample",),
    "norms": ("field", "grid", "norms"),
    "degiorgi": ("field", "grid"),
}

STOCHASTIC = {"mc-run", "superposition", "coupling", "krylov", "counterexample"}


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise ConfigInvalid([f"cannot read config: {exc}"]) from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid([f"config is not valid TOML: {exc}"]) from exc


def canonical(cfg: dict) -> dict:
    """Config without fields that cannot change results (output location)."""
    c = copy.deepcopy(cfg)
    out = c.get("output")
    if isinstance(out, dict):
        out.pop("dir", None)
    return c


def config_hash(cfg: dict) -> str:
    blob = json.dumps(canonical(cfg), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _num(diag, block, key, name, positive=False, integer=False):
    if key not in block:
        return
    v = block[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if integer:
        ok = isinstance(v, int) and not isinstance(v, bool)
    if not ok:
        diag.append(f"{name}.{key}: expected {'integer' if integer else 'number'}, got {v!r}")
    elif positive and v <= 0:
        diag.append(f"{name}.{key}: must be positive, got {v!r}")


def _counterexample_params(block: dict) -> CounterexampleParams:
    return CounterexampleParams(
        d=int(block.get("d", block.get("dim", 3))), p=float(block.get("p", 2.0)), alpha=float(block.get("alpha", 1.2)),
        N=float(block["N"]) if isinstance(block.get("N"), (int, float)) else 1.0,
        kappa=float(block.get("kappa", 1.3)), sigma=float(block.get("sigma", 1.0)), check_gates=False)


def validate(cfg: dict) -> list[str]:
    """All schema and parameter-gate problems of a config, without running it."""
    diag: list[str] = []
    if not isinstance(cfg, dict):
        return ["config must be a table"]
    kind = cfg.get("kind")
    if kind not in KINDS:
        diag.append(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
        return diag
    for blk in REQUIRED[kind]:
        if not isinstance(cfg.get(blk), dict):
            diag.append(f"{blk}: block required for kind {kind}")
    if kind in STOCHASTIC:
        if "seed" not in cfg:
            diag.append(f"seed: required for stochastic kind {kind}")
        elif not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
            diag.append(f"seed: expected nonnegative integer, got {cfg['seed']!r}")

    fld = cfg.get("field")
    if isinstance(fld, dict):
        name = fld.get("name")
        if name not in BUILTIN_FIELDS:
            diag.append(f"field.name: unknown field {name!r}; known: {', '.join(BUILTIN_FIELDS)}")
        _num(diag, fld, "dim", "field", positive=True, integer=True)
        _num(diag, fld, "diffusion", "field", positive=True)
        _num(diag, fld, "restrict_width", "field", positive=True)
        if name == "counterexample":
            diag.extend(f"field: {m}" for m in _counterexample_params(fld).gate_violations())
        g = cfg.get("grid")
        if isinstance(g, dict) and "dim" in fld and "d" in g and fld["dim"] != g["d"] and name != "counterexample":
            diag.append(f"grid.d = {g['d']} does not match field.dim = {fld['dim']}")

    g = cfg.get("grid")
    if isinstance(g, dict):
        for key in ("d", "L", "h"):
            if key not in g:
                diag.append(f"grid.{key}: required")
        _num(diag, g, "d", "grid", positive=True, integer=True)
        for key in ("L", "h", "T", "dt"):
            _num(diag, g, key, "grid", positive=True)
        if all(isinstance(g.get(k), (int, float)) for k in ("L", "h")) and g.get("h", 0) > 0:
            n = 2 * g["L"] / g["h"]
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                diag.append(f"grid: 2L/h = {n:g} is not an integer")

    p = cfg.get("particles")
    if isinstance(p, dict):
        for key in ("M",):
            if key not in p:
                diag.append(f"particles.{key}: required")
        _num(diag, p, "M", "particles", positive=True, integer=True)
        _num(diag, p, "dt", "particles", positive=True)
        _num(diag, p, "T", "particles", positive=True)
        if "taming" in p and p["taming"] not in ("auto", "on", "off"):
            diag.append(f"particles.taming: expected auto, on or off, got {p['taming']!r}")

    fp = cfg.get("fpe", {})
    if isinstance(fp, dict):
        if "form" in fp and fp["form"] not in ("fpe", "ke"):
            diag.append(f"fpe.form: expected fpe or ke, got {fp['form']!r}")
        if "boundary" in fp and fp["boundary"] not in ("no-flux", "open"):
            diag.append(f"fpe.boundary: expected no-flux or open, got {fp['boundary']!r}")

    ce = cfg.get("counterexample")
    if kind == "counterexample" and isinstance(ce, dict):
        n_val = ce.get("N", "calibrate")
        if not (n_val == "calibrate" or (isinstance(n_val, (int, float)) and n_val >= 0)):
            diag.append(f"counterexample.N: expected 'calibrate' or a nonnegative number, got {n_val!r}")
        diag.extend(f"counterexample: {m}" for m in _counterexample_params(ce).gate_violations())
        _num(diag, ce, "M", "counterexample", positive=True, integer=True)
        _num(diag, ce, "dt", "counterexample", positive=True)
        _num(diag, ce, "T_max", "counterexample", positive=True)

    nb = cfg.get("norms")
    if kind == "norms" and isinstance(nb, dict):
        if "p" not in nb:
            diag.append("norms.p: required (number or list)")

    kb = cfg.get("krylov")
    if kind == "krylov" and isinstance(kb, dict):
        if not isinstance(kb.get("deltas"), list) or len(kb.get("deltas", [])) < 2:
            diag.append("krylov.deltas: need a list of at least two window lengths")
        if kb.get("f", "one") not in ("one", "ball", "zero"):
            diag.append(f"krylov.f: expected one, ball or zero, got {kb.get('f')!r}")

    out = cfg.get("output", {})
    if isinstance(out, dict) and out.get("figures"):
        try:
            import matplotlib  # noqa: F401
        except ImportError:
            diag.append("output.figures: matplotlib is not installed (pip install 'artifact[report]')")
    return diag


def require_valid(cfg: dict) -> None:
    problems = validate(cfg)
    if problems:
        raise ConfigInvalid(problems)
