import json
import subprocess
import sys

import numpy as np
import pytest

from tomosel import cli
from tomosel.config import DEFAULTS, ConfigError, RunConfig


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return p


def _run(*args):
    return cli.main(list(args))


def test_defaults_are_desk_config():
    cfg = RunConfig.default()
    assert (cfg["m"], cfg.q, cfg["delta"], cfg["dimension"], cfg["x_star"]) == (8, 34, 0.1, 2, 1.0)
    assert [m.kind for m in cfg.noise_family.models] == ["gaussian", "laplace", "rademacher"]


def test_auto_q():
    assert RunConfig.from_dict({"q": "auto", "m": 4}).q == 18
    assert RunConfig.from_dict({"q": "auto", "m": 16, "sigma_mode": "estimated"}).q == 256


def test_delta_error_names_constraint_and_line(tmp_path, capsys):
    p = _write(tmp_path, {"m": 8, "delta": 0.2})
    assert _run("select", str(p)) == 2
    err = capsys.readouterr().err
    assert "(0, 1/8)" in err and "cfg.json:3" in err and "[delta]" in err


def test_unknown_and_nested_keys(tmp_path):
    with pytest.raises(ConfigError) as e:
        RunConfig.load(_write(tmp_path, {"m": 8, "grid": {"kstar": 3}}))
    assert e.value.path == "grid.kstar" and e.value.line == 4
    with pytest.raises(ConfigError) as e:
        RunConfig.load(_write(tmp_path, {"noise": {"models": [{"kind": "cauchy", "sigma": 0.1}]}}))
    assert e.value.path == "noise.models.0.kind" and e.value.line == 5


def test_invalid_json_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "m": 8,\n  "q": ,\n}')
    with pytest.raises(ConfigError) as e:
        RunConfig.load(p)
    assert e.value.line == 3


@pytest.mark.parametrize(
    "override, key",
    [
        ({"q": 20}, "q"),
        ({"sigma_mode": "estimated", "m": 3, "q": 14}, "m"),
        ({"sigma_mode": "estimated", "q": 34}, "q"),
        ({"replications": 50}, "replications"),
        ({"noise": {"fourth_hi": 0.001}}, "noise"),
        ({"seed": -1}, "seed"),
        ({"phantom": [{"center": [0.9, 0.0], "radius": 0.5}]}, "phantom"),
    ],
)
def test_precondition_errors(override, key):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict(override)
    assert e.value.path.startswith(key)


def test_missing_dependency(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TOMOSEL_OUTPUT_DIR", str(tmp_path / "out"))
    p = _write(tmp_path, {})
    assert _run("estimate", str(p)) == 3
    assert "run 'simulate' first" in capsys.readouterr().err


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    p = _write(tmp_path, {"output_dir": "elsewhere"})
    monkeypatch.delenv("TOMOSEL_OUTPUT_DIR", raising=False)
    assert RunConfig.load(p).output_dir() == tmp_path / "elsewhere"
    monkeypatch.setenv("TOMOSEL_OUTPUT_DIR", str(tmp_path / "env"))
    assert RunConfig.load(p).output_dir() == tmp_path / "env"


def _pipeline(cfg_path, steps=("simulate", "estimate", "select", "risk", "verify", "report")):
    return [_run(s, str(cfg_path)) for s in steps]


def test_full_pipeline_and_round_trip(tmp_path, monkeypatch):
    p = _write(tmp_path, {})
    outs = []
    for name in ("a", "b"):
        monkeypatch.setenv("TOMOSEL_OUTPUT_DIR", str(tmp_path / name))
        assert _pipeline(p) == [0] * 6
        outs.append(tmp_path / name)
    a, b = outs
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert json.loads((a / "report.meta.json").read_text())["created"]
    rows = (a / "checks.csv").read_text().splitlines()[1:]
    required = [r for r in rows if r.split(",")[4] == "True"]
    assert required and all(r.split(",")[1] == "pass" for r in required)
    head = (a / "samples.csv").read_text().splitlines()[0]
    assert head == "j1,j2,l,s,radon_value,noise,y"
    rep = json.loads((a / "report.json").read_text())
    assert rep["seed"] == DEFAULTS["seed"] and rep["risk"]["factor"] == 2.0
    assert (a / "risk_per_lambda.csv").read_text().startswith("noise,beta,ell,mean,se")


def test_pgm_and_sidecar(tmp_path, monkeypatch):
    monkeypatch.setenv("TOMOSEL_OUTPUT_DIR", str(tmp_path / "o"))
    p = _write(tmp_path, {"raster_resolution": 64})
    assert _pipeline(p, ("simulate", "estimate", "select")) == [0, 0, 0]
    img = cli.read_pgm(tmp_path / "o" / "reconstruction.pgm")
    meta = json.loads((tmp_path / "o" / "reconstruction.json").read_text())
    assert img.shape == (64, 64) and img.min() == 0 and img.max() == 255
    assert set(meta) == {"min", "max", "resolution"} and meta["resolution"] == 64
    assert meta["min"] < 0 < meta["max"]


def test_pgm_orientation(tmp_path):
    r = np.zeros((8, 8))
    r[7, 0] = 1.0  # largest x1, smallest x2: bottom-right pixel
    cli.write_pgm(tmp_path / "x.pgm", r)
    img = cli.read_pgm(tmp_path / "x.pgm")
    assert img[7, 7] == 255 and img.sum() == 255


def test_noiseless_select_minimizes_error(tmp_path, monkeypatch):
    monkeypatch.setenv("TOMOSEL_OUTPUT_DIR", str(tmp_path / "o"))
    cfg = {"noise": {"models": [{"kind": "gaussian", "sigma": 0.0}], "sigma_lo": 0.0}}
    p = _write(tmp_path, cfg)
    assert _pipeline(p, ("simulate", "estimate", "select")) == [0, 0, 0]
    sel = json.loads((tmp_path / "o" / "selection.json").read_text())
    assert sel["sigma_used"] == 0.0
    assert sel["empirical_error"] == sel["oracle_empirical_error"]


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "tomosel.cli", "defaults"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["m"] == 8
