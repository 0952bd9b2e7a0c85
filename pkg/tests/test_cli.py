import json
import subprocess
import sys

import numpy as np
import pytest

from ergokit.cli import GridSpec, main, memory_estimate, parse_config, parse_grid, run
from ergokit.errors import ConfigError, ResourceError
from ergokit.io import read_csv


def test_defaults_from_empty_text():
    cfg = parse_config("", require_experiment=False)
    assert cfg.chain.n_sites == 7
    assert cfg.chain.hx == 1.05 and cfg.chain.hz == 0.5
    assert cfg.seeds == (0,)
    assert cfg.options["window"] == 51
    with pytest.raises(ConfigError):
        parse_config("")


def test_rstat_default_grid():
    cfg = parse_config("experiment = rstat\n")
    jrs = cfg.j_ratios()
    assert len(jrs) == 50
    assert jrs[0] == 1.05 and jrs[-1] == 5.0
    # a fixed ratio replaces the sweep
    assert parse_config("experiment = rstat\njr = 2\n").j_ratios() == [2.0]


def test_malformed_value_names_field_and_line():
    text = "experiment = woff\n# comment\nhx = abc\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "hx"
    assert info.value.line == 3
    assert "hx" in str(info.value) and "3" in str(info.value)


@pytest.mark.parametrize("text, field", [
    ("experiment = woff\nn = 4\n", "n"),
    ("experiment = woff\nn = 15\n", "n"),
    ("experiment = woff\njr = -1\n", "jr"),
    ("experiment = woff\nwindow = 4\n", "window"),
    ("experiment = entanglement\ncut = 7\n", "cut"),
    ("experiment = otoc\nsites = 1,9\n", "sites"),
    ("experiment = krylov\nops = O3\n", "ops"),
    ("experiment = woff\nbogus = 1\n", "bogus"),
    ("experiment = woff\nformat = xml\n", "format"),
])
def test_invalid_configs(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_overrides_win():
    cfg = parse_config("experiment = woff\nhx = 0.3\n", {"hx": "0.9", "n": "5"})
    assert cfg.chain.hx == 0.9 and cfg.chain.n_sites == 5


def test_parse_grid_forms():
    g = parse_grid("1:10:4")
    assert np.allclose(g.values(), [1, 4, 7, 10])
    assert np.allclose(parse_grid("1:100:3:log").values(), [1, 10, 100])
    assert np.allclose(parse_grid("0.5, 2,3").values(), [0.5, 2, 3])
    assert len(parse_grid("7")) == 1
    assert GridSpec(explicit=(1.0, 2.0)).label() == "1-2x2"
    for bad in ("0:10:5:log", "1:2", "1:2:3:cubic", "a,b", ""):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_memory_guard():
    cfg = parse_config("experiment = krylov\nn = 13\n")
    assert memory_estimate(cfg) > 8 * 1024**3
    with pytest.raises(ResourceError) as info:
        run(cfg)
    assert info.value.estimate_bytes > 0


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["woff", "--n", "5", "--jr-grid", "5:20:4:log", "--out", out]) == 0
    assert main(["woff", "--hx", "abc", "--out", out]) == 2
    assert main(["woff", "--config", str(tmp_path / "missing.cfg"), "--out", out]) == 2
    assert main(["krylov", "--n", "13", "--out", out]) == 3
    assert "refused" in capsys.readouterr().err


def test_woff_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["woff", "--n", "5", "--jr-grid", "5:20:4:log", "--out", str(d)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == ["woff_N5_Jr5-20x4_seed0.csv", "woff_N5_Jr5-20x4_seed0.json"]
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    payload = json.loads((a / files[1]).read_text())
    assert payload["config"]["chain"]["n_sites"] == 5
    assert payload["config"]["experiment"] == "woff"
    header, cols = read_csv(str(a / files[0]))
    assert len(header) == len(cols) and len(cols[0]) == 4


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 5\njr = 2\nformat = json\n")
    assert main(["rstat", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert [p.name for p in tmp_path.glob("*.json")] == ["rstat_N5_Jr2_seed0.json"]


def test_small_runs(tmp_path):
    out = str(tmp_path)
    args = ["--n", "5", "--out", out, "--format", "json"]
    assert main(["spectrum", *args]) == 0
    assert main(["sff", *args, "--points", "2000", "--t-max", "2", "--window", "11"]) == 0
    assert main(["otoc", *args, "--t-grid", "0.1:0.6:100", "--sat-grid", "0.1:1e4:50:log"]) == 0
    assert main(["krylov", *args, "--ops", "O1", "--max-k", "50", "--t-grid", "0:10:11"]) == 0
    assert main(["entanglement", *args, "--cut", "2"]) == 0
    assert main(["quench", *args, "--cut", "2", "--t-grid", "0:5:6"]) == 0
    assert len(list(tmp_path.glob("*.json"))) >= 6


def test_verify_bch(tmp_path, capsys):
    assert main(["verify-bch", "--out", str(tmp_path)]) == 0
    report = json.loads(next(tmp_path.glob("verify-bch_N3*.json")).read_text())
    assert report["passed"]
    assert main(["verify-bch", "--n", "5", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ergokit", "woff", "--n", "3", "--jr-grid", "5,10",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
