import copy
import hashlib
import json
from pathlib import Path

import pytest

from slflab.cli.config import config_hash, load_config, validate
from slflab.cli.main import main, run
from slflab.errors import ConfigInvalid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

HEAT = {
    "kind": "fpe-solve",
    "field": {"name": "constant", "dim": 2, "diffusion": 1.0},
    "grid": {"d": 2, "L": 2.0, "h": 0.1, "T": 0.1},
    "fpe": {"times": [0.05, 0.1]},
}

MC = {
    "kind": "mc-run",
    "seed": 5,
    "field": {"name": "rotation", "dim": 2},
    "particles": {"M": 3000, "dt": 0.01, "T": 0.2, "start": [0.5, 0.0], "record": True},
}


def write_toml(path, text):
    path.write_text(text)
    return path


def test_validate_heat_config_clean():
    assert validate(HEAT) == []


def test_validate_counterexample_gate():
    cfg = {"kind": "counterexample", "seed": 1, "counterexample": {"d": 3, "p": 2.0, "alpha": 2.0}}
    problems = validate(cfg)
    assert any("α ∉ (1, d/p)" in p for p in problems)


def test_validate_missing_seed():
    cfg = copy.deepcopy(MC)
    del cfg["seed"]
    assert validate(cfg) == ["seed: required for stochastic kind mc-run"]


@pytest.mark.parametrize("mutate,fragment", [
    (lambda c: c.update(kind="bogus"), "kind"),
    (lambda c: c.pop("grid"), "grid: block required"),
    (lambda c: c["grid"].update(h=0.3), "not an integer"),
    (lambda c: c["field"].update(name="nope"), "unknown field"),
    (lambda c: c.update(fpe={"form": "weird"}), "fpe.form"),
])
def test_validate_field_level_messages(mutate, fragment):
    cfg = copy.deepcopy(HEAT)
    mutate(cfg)
    assert any(fragment in p for p in validate(cfg))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert validate(load_config(path)) == []


def test_config_hash_ignores_output_dir():
    a = copy.deepcopy(HEAT)
    b = copy.deepcopy(HEAT)
    a["output"] = {"dir": "x"}
    b["output"] = {"dir": "y"}
    assert config_hash(a) == config_hash(b) != config_hash({**HEAT, "grid": {**HEAT["grid"], "h": 0.05}})


def test_run_invalid_raises_config_invalid(tmp_path):
    with pytest.raises(ConfigInvalid):
        run({"kind": "fpe-solve"}, tmp_path)


def test_run_manifest_complete_with_sidecars(tmp_path):
    man = run(HEAT, tmp_path)
    written = {p.name for p in tmp_path.iterdir()} - {"manifest.json"}
    assert written == set(man.outputs) | set(man.sidecars)
    for name in man.outputs:
        meta = json.loads((tmp_path / f"{name}.meta.json").read_text())
        assert meta["config_hash"] == man.config_hash
        assert meta["sha256"] == hashlib.sha256((tmp_path / name).read_bytes()).hexdigest()
        assert man.checksums[name] == meta["sha256"]
    assert json.loads((tmp_path / "manifest.json").read_text())["kind"] == "fpe-solve"


def test_rerun_bitwise_identical_across_threads(tmp_path):
    a = run(MC, tmp_path / "a", threads=1)
    b = run(MC, tmp_path / "b", threads=4)
    assert a.checksums == b.checksums and a.outputs == b.outputs


def test_cli_exit_codes(tmp_path, capsys):
    good = write_toml(tmp_path / "heat.toml", """
kind = "fpe-solve"
[field]
name = "constant"
dim = 2
[grid]
d = 2
L = 1.0
h = 0.1
T = 0.01
""")
    assert main(["validate", "--config", str(good)]) == 0
    assert main(["run", "--config", str(good), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "manifest.json").exists()
    bad = write_toml(tmp_path / "bad.toml", 'kind = "mc-run"\n')
    assert main(["validate", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
    broken = write_toml(tmp_path / "broken.toml", "kind = [\n")
    assert main(["validate", "--config", str(broken)]) == 2
    # a drift that makes the explicit step blow up is an engine error
    engine = write_toml(tmp_path / "engine.toml", """
kind = "fpe-solve"
[field]
name = "constant"
dim = 2
[grid]
d = 2
L = 1.0
h = 0.1
dt = 1.0
T = 1.0
""")
    assert main(["run", "--config", str(engine), "--out", str(tmp_path / "e")]) == 3
    assert "engine error" in capsys.readouterr().err


def test_seed_override_recorded(tmp_path):
    cfg = write_toml(tmp_path / "mc.toml", """
kind = "mc-run"
seed = 1
[field]
name = "constant"
dim = 2
[particles]
M = 100
dt = 0.1
T = 0.2
""")
    assert main(["run", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 9


def test_list_commands(capsys):
    assert main(["list-fields"]) == 0
    assert "counterexample" in capsys.readouterr().out
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for kind in ("fpe-solve", "mc-run", "superposition", "coupling", "krylov", "counterexample", "norms", "degiorgi"):
        assert kind in out


def test_norms_run_finite_below_critical(tmp_path):
    cfg = {
        "kind": "norms",
        "field": {"name": "counterexample", "alpha": 1.2, "N": 1.0},
        "grid": {"d": 3, "L": 1.0, "h": 0.2},
        "norms": {"p": [1.5, 2.0, 2.5], "q": "inf", "refine": [0.2, 0.1]},
    }
    run(cfg, tmp_path)
    rows = (tmp_path / "norms.csv").read_text().splitlines()[1:]
    for r in rows:
        p, _, _, norm, _, finite = r.split(",")
        if float(p) < 2.5:
            assert finite == "True" and float(norm) > 0


def test_counterexample_run_small(tmp_path):
    cfg = {
        "kind": "counterexample", "seed": 2,
        "counterexample": {"N": 512, "M": 200, "dt": 0.015625, "T_max": 2.0,
                           "starts": [[0.0, 0.0, 0.05], [0.0, 0.0, 0.025]]},
    }
    man = run(cfg, tmp_path)
    stats = json.loads((tmp_path / "split_statistics.json").read_text())
    assert stats["N"] == 512 and len(stats["EF"]) == 2
    assert all(a == 0.0 for a in stats["antithetic"])
    assert "split_statistics.json" in man.outputs


def test_figures_rendered_deterministically(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = {**HEAT, "output": {"figures": True}}
    a = run(cfg, tmp_path / "a")
    b = run(cfg, tmp_path / "b")
    assert "snapshot_final.png" in a.outputs
    assert a.checksums["snapshot_final.png"] == b.checksums["snapshot_final.png"]
