import json
import os
import subprocess
import sys

import pytest

from smwss.cli import main
from smwss.config import DEFAULTS, parse_config, parse_override
from smwss.errors import ConfigError

FAST = ["--set", "solver.density=600", "--set", "solver.lattice_points=200"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    lines = path.read_text().splitlines()
    header = {l[2:].split(": ", 1)[0]: l[2:].split(": ", 1)[1] for l in lines if l.startswith("# ")}
    body = [l.split(",") for l in lines if not l.startswith("#")]
    return header, body[0], body[1:]


# configuration


def test_empty_config_gives_defaults(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg.to_dict() == DEFAULTS
    m = cfg["model"]
    assert (m["U"], m["z0"], m["temperature"], m["atom"], m["stack"]) == (3.0, 2.3, 300.0, "rb87", "bragg532")
    assert parse_config(None).fingerprint == cfg.fingerprint


def test_range_errors_itemized(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[model]\nU = -1\ntemperature = 2000\n")
    with pytest.raises(ConfigError) as e:
        parse_config(p)
    msg = str(e.value)
    assert "model.U" in msg and "model.temperature" in msg


def test_unknown_key_named(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[model]\nfoo = 1\n")
    with pytest.raises(ConfigError, match="foo"):
        parse_config(p)
    p.write_text("[nonsense]\nU = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        parse_config(p)


def test_parse_error_location(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[model]\nU = = 3\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config(p)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.toml")
    with pytest.raises(ConfigError):
        parse_config(None, ["model.stack=" + str(tmp_path / "none.json")])


def test_overrides():
    assert parse_override("model.U=5") == {"model": {"U": 5}}
    assert parse_override("model.variant=perfect") == {"model": {"variant": "perfect"}}
    cfg = parse_config(None, ["model.U=5", "solver.window=[-1, 1]"])
    assert cfg["model"]["U"] == 5.0 and cfg["solver"]["window"] == [-1.0, 1.0]
    with pytest.raises(ConfigError):
        parse_override("model.U")


def test_fingerprint_tracks_inputs(tmp_path):
    base = parse_config(None)
    assert parse_config(None, ["model.U=3.0000001"]).fingerprint != base.fingerprint
    assert parse_config(None, ["model.U=3"]).fingerprint == base.fingerprint
    # a copied data file with one changed byte changes the fingerprint
    src = next(p for p in base.data_files() if p.name.startswith("bragg532"))
    text = src.read_text()
    copy = tmp_path / "stack.json"
    copy.write_text(text)
    a = parse_config(None, [f"model.stack={json.dumps(str(copy))}"]).fingerprint
    copy.write_text(text.replace("10", "11", 1) if "10" in text else text + " ")
    b = parse_config(None, [f"model.stack={json.dumps(str(copy))}"]).fingerprint
    assert a != b


# commands


def test_perfect_surface_command(capsys, tmp_path):
    code, out, _ = run(capsys, "perfect-surface", "--out", str(tmp_path), "--cache", "none")
    assert code == 0
    doc = json.loads(out)
    assert doc["status"] == "ok"
    header, cols, rows = read_csv(tmp_path / "perfect_surface.csv")
    assert "fingerprint" in header and header["units"]
    iv = [float(r[cols.index("interval")]) for r in rows[1:7]]
    expected = [-0.1371, -0.0996, -0.0804, -0.0722, -0.0703, -0.0701]
    assert all(abs(a - b) < 2e-3 for a, b in zip(iv, expected))
    man = json.loads((tmp_path / "manifest_perfect-surface.json").read_text())
    assert set(man["outputs"]) == {"perfect_surface.csv"}


def test_eigen_deterministic(capsys, tmp_path, cache_dir):
    digests = []
    for i, threads in enumerate((1, 3)):
        out = tmp_path / f"r{i}"
        code, _, _ = run(capsys, "eigen", "--out", str(out), "--cache", str(cache_dir), "--threads", str(threads), *FAST)
        assert code == 0
        digests.append(json.loads((out / "manifest_eigen.json").read_text())["outputs"])
    assert digests[0] == digests[1]
    header, cols, rows = read_csv(tmp_path / "r0" / "eigen.csv")
    labels = [r[cols.index("label")] for r in rows]
    assert labels[:2] == ["surface-bound", "surface-bound"]


def test_json_mirror_and_env_out(capsys, tmp_path, cache_dir, monkeypatch):
    monkeypatch.setenv("SMWSS_OUT", str(tmp_path / "env"))
    code, _, _ = run(capsys, "potential", "--cache", str(cache_dir), "--format", "csv+json",
                     "--set", "output.potential_points=50")
    assert code == 0
    doc = json.loads((tmp_path / "env" / "potential.json").read_text())
    assert doc["columns"][0] == "z" and len(doc["rows"]) == 50
    assert len(doc["units"]) == len(doc["columns"])


def test_cp_table_threads_independent(capsys, tmp_path):
    small = ["--set", "cp.z_max=20", "--set", "cp.points_per_decade=8", "--cache", "none"]
    for i, t in enumerate((1, 4)):
        assert run(capsys, "cp-table", "--out", str(tmp_path / str(i)), "--threads", str(t), *small)[0] == 0
    assert (tmp_path / "0" / "cp_table.csv").read_bytes() == (tmp_path / "1" / "cp_table.csv").read_bytes()


def test_config_error_exit(capsys, tmp_path):
    code, out, err = run(capsys, "eigen", "--out", str(tmp_path), "--set", "model.U=-1")
    assert code == 2 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "ConfigError" and "model.U" in doc["message"] and doc["exit_code"] == 2


def test_resource_error_exit(capsys, tmp_path, cache_dir):
    code, _, err = run(capsys, "eigen", "--out", str(tmp_path), "--cache", str(cache_dir),
                       "--set", "solver.density=1e6")
    assert code == 4 and json.loads(err)["error"] == "ResourceError"


def test_matching_error_exit(capsys, tmp_path, cache_dir):
    code, _, err = run(capsys, "eigen", "--out", str(tmp_path), "--cache", str(cache_dir),
                       "--set", "model.c3=6.6", *FAST)
    assert code == 3 and json.loads(err)["error"] == "MatchingError"


def test_module_entry_point(tmp_path):
    env = {**os.environ, "SMWSS_OUT": str(tmp_path)}
    p = subprocess.run([sys.executable, "-m", "smwss", "perfect-surface", "--set", "model.U=0"],
                       capture_output=True, text=True, env=env)
    assert p.returncode == 2
    assert json.loads(p.stderr)["exit_code"] == 2
    p = subprocess.run([sys.executable, "-m", "smwss", "--version"], capture_output=True, text=True)
    assert p.returncode == 0 and "smwss" in p.stdout
