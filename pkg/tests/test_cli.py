import json
import subprocess
import sys
import zipfile

import pytest

from sparsens.cli import main, validate_config
from sparsens.errors import ConfigError


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def fixture_run(tmp_path):
    out = tmp_path / "run"
    assert main(["certify", "--fixture", "indicator", "--out", str(out)]) == 0
    return out


def test_fixture_certify_passes(fixture_run):
    report = json.loads((fixture_run / "report.json").read_text())
    assert report["verdict"] == "pass"
    files = json.loads((fixture_run / "manifest.json").read_text())["files"]
    assert {"report.json", "field.spns", "certificate.png", "config.json"} <= set(files)


def test_invalid_epsilon_exits_2(tmp_path, capsys):
    cfg = json.loads(
        '{"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "indicator_example"},'
        ' "sparseness": {"epsilon": 1.5, "beta": 0.5, "ell": 1.0}}'
    )
    code = main(["certify", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "sparseness.epsilon must lie in (0, 1), got 1.5" in capsys.readouterr().err
    assert not (tmp_path / "o" / "report.json").exists()


@pytest.mark.parametrize(
    "cfg, message",
    [
        ({"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "white_noise"}, "frequency": {"beta": 0.5, "J": 2}, "colour": 1}, "colour"),
        ({"grid": {"d": 1, "n": 60, "L": 8.0}, "field": {"kind": "white_noise"}, "frequency": {"beta": 0.5, "J": 2}}, "invalid grid"),
        ({"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "swirl"}, "frequency": {"beta": 0.5, "J": 2}}, "unknown field kind"),
        ({"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "white_noise"}}, "frequency"),
    ],
)
def test_config_errors(cfg, message):
    with pytest.raises(ConfigError, match=message):
        validate_config("freq", cfg)


def test_missing_config_exits_2(tmp_path):
    assert main(["freq", "--out", str(tmp_path)]) == 2


def test_unresolvable_level_exits_3(tmp_path):
    cfg = {"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "white_noise"}, "frequency": {"beta": 0.5, "J": 40}}
    assert main(["freq", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 3


def test_failing_verdict_exits_1(tmp_path):
    cfg = {
        "grid": {"d": 1, "n": 256, "L": 8.0},
        "field": {"kind": "plane_wave", "kappa": [0], "amplitude": 1.0},
        "sparseness": {"epsilon": 0.1, "beta": 0.5, "ell": 1.0},
    }
    code = main(["certify", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == 1


def test_region_vertices(tmp_path):
    out = tmp_path / "region"
    assert main(["region", "--d", "3", "--p", "3", "--out", str(out)]) == 0
    rows = (out / "vertices.csv").read_text().splitlines()
    assert len(rows) == 5
    assert (out / "region.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_bundle_round_trip(fixture_run, tmp_path):
    archive = tmp_path / "run.zip"
    assert main(["bundle", str(fixture_run), str(archive)]) == 0
    with zipfile.ZipFile(archive) as zf:
        assert "manifest.json" in zf.namelist()
    again = tmp_path / "again"
    assert main(["certify", "--from-bundle", str(archive), "--out", str(again)]) == 0
    report = json.loads((again / "report.json").read_text())
    assert report["results"]["reproduced"] is True


def test_bundle_rejects_incomplete(fixture_run, tmp_path):
    (fixture_run / "field.spns").unlink()
    assert main(["bundle", str(fixture_run), str(tmp_path / "x.zip")]) == 2


def test_bundle_rejects_empty_dir(tmp_path):
    assert main(["bundle", str(tmp_path), str(tmp_path / "x.zip")]) == 2


@pytest.mark.parametrize(
    "args",
    [
        ["certify", "--fixture", "indicator"],
        ["region", "--d", "3", "--p", "4"],
    ],
)
def test_runs_are_byte_identical(tmp_path, args):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("manifest.json", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    for png in a.glob("*.png"):
        assert png.read_bytes() == (b / png.name).read_bytes()


def test_seed_flag_changes_config_hash(tmp_path):
    cfg = {"grid": {"d": 1, "n": 64, "L": 8.0}, "field": {"kind": "white_noise"}, "frequency": {"beta": 0.5, "J": 2}}
    path = write_config(tmp_path, cfg)
    hashes = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        main(["freq", "--config", str(path), "--seed", str(seed), "--out", str(out)])
        hashes.append(json.loads((out / "manifest.json").read_text())["config_sha256"])
    assert hashes[0] != hashes[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sparsens.cli", "region", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] == "pass"
