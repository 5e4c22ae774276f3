import csv
import json
from pathlib import Path

import pytest

from hermwave.cli import DEFAULTS, OUT_ENV, ConfigError, run, validate_config

DEMO = Path(__file__).resolve().parent.parent / "demos" / "scaling_h2.json"


def _summary(capsys):
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_unknown_command(capsys):
    assert run(["frobnicate"]) == 64
    assert "usage" in capsys.readouterr().err
    assert run([]) == 64


def test_bad_d(capsys, tmp_path):
    assert run(["synth", "--d", "0.6", "--out", str(tmp_path)]) == 2
    out = _summary(capsys)
    assert out["status"] == "config-error"
    assert any("0<d<1/2" in e for e in out["errors"])
    assert not list(tmp_path.iterdir())


def test_haar_cannot_carry_K2():
    with pytest.raises(ConfigError) as exc:
        validate_config({"bank": "haar", "K": 2}, "coeffs")
    assert any("M >= K" in e for e in exc.value.errors)


def test_all_errors_listed():
    with pytest.raises(ConfigError) as exc:
        validate_config({"d": 0.7, "bank": "haar", "K": 2, "J": 0}, "coeffs")
    assert len(exc.value.errors) == 3


def test_empty_config_file(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert run(["coeffs", "--config", str(path)]) == 2
    assert _summary(capsys)["errors"]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        validate_config({"colour": "blue"})


def test_provenance(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"d": 0.3}))
    rc = validate_config(str(path), "synth", {"n": 64})
    assert rc.d == 0.3 and rc.n == 64 and rc.out == str(tmp_path)
    assert rc.provenance["d"] == "config" and rc.provenance["n"] == "flag"
    assert rc.provenance["out"] == "env" and rc.provenance["G"] == "default"
    assert set(rc.provenance) == set(DEFAULTS)


def test_spectrum_stabilizes(tmp_path, capsys):
    assert run(["spectrum", "--d", "0.35", "--q", "2", "--out", str(tmp_path)]) == 0
    out = _summary(capsys)
    assert out["singular_exponent"] == pytest.approx(0.4)
    assert out["scaled_band_variation"] < 0.05
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ") and '"seed": 0' in lines[0]
    assert lines[2] == "lambda,value,scaled"


@pytest.mark.parametrize("cmd,flags,files", [
    ("synth", ["--n", "256"], ["series.csv"]),
    ("filters-check", ["--bank", "db2", "--J", "5"], ["bank.txt", "transfer.csv", "filters.json"]),
    ("coeffs", ["--n", "1024", "--J", "4"], ["coeffs.csv", "coeffs_summary.json"]),
    ("limit-cov", ["--q", "1", "--J", "6", "--m-max", "1", "--k-max", "1"], ["limit_cov.csv"]),
    ("scaling", ["--n", "4096", "--J", "6", "--j-min", "2", "--j-max", "5", "--replicates", "6"],
     ["scaling.json", "scaling.csv"]),
    ("short-range", ["--d", "0.2", "--G", "H2", "--n", "4096", "--J", "6", "--j-min", "2",
                     "--j-max", "5", "--replicates", "6"], ["short_range.json", "short_range.csv"]),
    ("estimate", ["--n", "8192", "--J", "7", "--j-min", "3", "--j-max", "7", "--replicates", "4"],
     ["estimate.json"]),
])
def test_artifacts_reproducible(tmp_path, capsys, cmd, flags, files):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([cmd, *flags, "--seed", "5", "--out", str(a)]) == 0
    first = _summary(capsys)
    assert first["status"] == "ok" and first["seed"] == 5
    assert run([cmd, *flags, "--seed", "5", "--out", str(b)]) == 0
    capsys.readouterr()
    for name in files:
        text = (a / name).read_text()
        # the out directory differs between the runs; everything else must match
        assert text.replace(str(a), "OUT") == (b / name).read_text().replace(str(b), "OUT")
        if name.endswith(".json"):
            obj = json.loads(text)
            assert obj["config"]["values"]["seed"] == 5
            assert obj["config"]["provenance"]["seed"] == "flag"
        else:
            assert text.startswith("# config: ") and '"seed": 5' in text.splitlines()[0]


def test_estimate_from_coeffs_file(tmp_path, capsys):
    assert run(["coeffs", "--n", "65536", "--J", "8", "--seed", "2", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert run(["estimate", "--coeffs", str(tmp_path / "coeffs.csv"), "--J", "8", "--j-min", "3",
                "--j-max", "7", "--out", str(tmp_path)]) == 0
    out = _summary(capsys)
    assert abs(out["estimate"] - 0.35) < 0.1


def test_series_csv_columns(tmp_path, capsys):
    assert run(["synth", "--n", "32", "--G", "H2", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(ln for ln in (tmp_path / "series.csv").read_text().splitlines()
                           if not ln.startswith("#")))
    assert rows[0] == ["index", "x", "y"] and len(rows) == 33


def test_wrong_regime_is_config_error(capsys):
    assert run(["scaling", "--d", "0.2", "--G", "H2"]) == 2
    assert any("q_c" in e for e in _summary(capsys)["errors"])


def test_demo_config_scaling(tmp_path, capsys):
    assert run(["scaling", "--config", str(DEMO), "--out", str(tmp_path)]) == 0
    out = _summary(capsys)
    lo, hi = out["slope_ci"]
    assert lo <= 0.4 <= hi and out["contains_target"]
