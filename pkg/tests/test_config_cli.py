import json

import numpy as np
import pytest

from pseudomode import acceptance, cli
from pseudomode.config import PRESETS, load_config, parse_filter, parse_override
from pseudomode.errors import ConfigError

SMALL = ["window.l_max=8", "window.re_max=4.0"]


@pytest.fixture
def small_cfg(pole_cache):
    return load_config(None, SMALL + [f'cache.dir="{pole_cache}"'], preset="d10")


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_file_resolves_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "[resonator]\nradius = 1\nindex = 3.446\n[emitter]\ndipole = 10\n"))
    assert cfg["resonator"]["radius"] == 1.0 and isinstance(cfg["resonator"]["radius"], float)
    assert cfg["emitter"]["omega0"] == "tuned"
    assert cfg["window"]["l_max"] == 30


def test_missing_required_keys_are_listed(tmp_path):
    with pytest.raises(ConfigError, match="resonator.radius, resonator.index, emitter.dipole"):
        load_config(write(tmp_path, "[window]\nl_max = 4\n"))


@pytest.mark.parametrize("text, message", [
    ("[resonator]\nradius = 1\nindex = 3\ncolour = 1\n[emitter]\ndipole = 1\n", "unknown key resonator.colour"),
    ("[resonator]\nradius = 1\nindex = 3\n[emitter]\ndipole = 1\n[extra]\na = 1\n", r"unknown section \[extra\]"),
    ("[resonator]\nradius = 'big'\nindex = 3\n[emitter]\ndipole = 1\n", "expected a number"),
    ("[resonator]\nradius = 1\nindex = 0.5\n[emitter]\ndipole = 1\n", "index must be >= 1"),
    ("[resonator]\nradius = 1\nindex = 3\n[emitter]\ndipole = -1\n", "non-negative"),
    ("[resonator]\nradius = 1\nindex = 3\n[emitter]\ndipole = 1\n[window]\nl_max = 2.5\n", "expected an integer"),
    ("[resonator]\nradius = 1\nindex = 3\n[emitter]\ndipole = 1\n[dynamics]\nmethod = 'rk4'\n", "dynamics.method"),
])
def test_strict_validation(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        load_config(write(tmp_path, text))


def test_parse_error_reports_location(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        load_config(write(tmp_path, "[resonator]\nradius = = 1\n"))


def test_overrides_take_precedence(tmp_path):
    path = write(tmp_path, "[resonator]\nradius = 1\nindex = 3.446\n[emitter]\ndipole = 10\n")
    cfg = load_config(path, ["emitter.dipole=100", "fieldmap.filter=except:8,3", "emitter.omega0=3.6"])
    assert cfg["emitter"]["dipole"] == 100.0
    assert cfg["emitter"]["omega0"] == 3.6
    assert cfg["fieldmap"]["filter"] == "except:8,3"


def test_override_syntax():
    assert parse_override("two_mode.keep=[[5,4]]") == {"two_mode": {"keep": [[5, 4]]}}
    assert parse_override("fieldmap.delay=surface") == {"fieldmap": {"delay": "surface"}}
    with pytest.raises(ConfigError):
        parse_override("dipole=3")
    with pytest.raises(ConfigError):
        parse_override("emitter.dipole")


def test_presets():
    assert set(PRESETS) == {"d10", "d100", "d1e4"}
    cfg = load_config(None, preset="d1e4")
    assert cfg["emitter"]["dipole"] == 1e4 and cfg["dynamics"]["classify"]
    assert load_config(None, preset="d100")["dynamics"]["t_max"] == 2e5
    with pytest.raises(ConfigError):
        load_config(None, preset="d7")


def test_filter_syntax():
    assert parse_filter("all") is None
    assert parse_filter("8,3") == ("only", [(8, 3)])
    assert parse_filter("except:5,4;8,3") == ("except", [(5, 4), (8, 3)])
    with pytest.raises(ConfigError):
        parse_filter("8-3")


def test_list_scenarios(capsys):
    assert cli.main(["--list-scenarios"]) == 0
    names = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["spectrum", "poles", "portraits", "dynamics", "two_mode", "fieldmap", "oracle_compare",
                     "acceptance"]


def test_errors_exit_with_one(tmp_path, capsys):
    assert cli.main(["dynamics"]) == 1
    assert cli.main(["nonsense", "--preset", "d10", "--out", str(tmp_path)]) == 1
    assert cli.main(["poles", "--config", str(tmp_path / "absent.toml")]) == 1
    bad = write(tmp_path, "[window]\nl_max = 3\n")
    assert cli.main(["poles", "--config", str(bad)]) == 1
    assert "missing required keys" in capsys.readouterr().err


def test_poles_scenario_and_manifest(small_cfg, tmp_path):
    status, files = cli.run_scenario("poles", small_cfg, tmp_path)
    assert status == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["scenario"] == "poles"
    assert manifest["config"] == json.loads(json.dumps(small_cfg))
    for entry in manifest["files"]:
        assert cli.sha256(tmp_path / entry["file"]) == entry["sha256"]
    assert sorted(e["file"] for e in manifest["files"]) == sorted(files)


def test_dynamics_scenario_outputs(small_cfg, tmp_path):
    cfg = dict(small_cfg, dynamics=dict(small_cfg["dynamics"], t_max=1000.0, n_t=101, background_rows=11))
    status, files = cli.run_scenario("dynamics", cfg, tmp_path)
    assert status == 0
    data = np.loadtxt(tmp_path / "dynamics.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == 101
    # The eigen route rebuilds the initial state to rounding accuracy.
    assert abs(data[0, 1] - 1.0) < 1e-12
    assert np.all(data[:, 1] <= 1.0 + 1e-12)


def test_fieldmap_and_two_mode_scenarios(small_cfg, tmp_path):
    cfg = dict(small_cfg, fieldmap=dict(small_cfg["fieldmap"], n_r=12, n_t=11, filter="8,3"),
               dynamics=dict(small_cfg["dynamics"], t_max=1000.0, n_t=51))
    for name in ("fieldmap", "two_mode"):
        status, files = cli.run_scenario(name, cfg, tmp_path / name)
        assert status == 0 and files


def test_outputs_are_byte_reproducible(small_cfg, tmp_path):
    cfg = dict(small_cfg, spectrum=dict(small_cfg["spectrum"], n_k=501, l_max=4))
    blobs = []
    for k in range(2):
        out = tmp_path / str(k)
        _, files = cli.run_scenario("spectrum", cfg, out)
        blobs.append({f: (out / f).read_bytes() for f in files + ["manifest.json"]})
    assert blobs[0] == blobs[1]


def test_acceptance_failure_exits_with_two(monkeypatch, tmp_path, capsys):
    failing = acceptance.CriterionResult("0", "stub", False, 1.0, 0.5, "always fails")
    monkeypatch.setattr(acceptance, "run_acceptance", lambda ctx: [failing])
    assert cli.main(["--acceptance", "--out", str(tmp_path), "--set", 'cache.dir="none"']) == 2
    assert "0/1 criteria passed" in capsys.readouterr().out
    passing = acceptance.CriterionResult("0", "stub", True, 0.0, 0.5, "always passes")
    monkeypatch.setattr(acceptance, "run_acceptance", lambda ctx: [passing])
    assert cli.main(["--acceptance", "--out", str(tmp_path), "--set", 'cache.dir="none"']) == 0
