"""Config validation, report emission, and exit codes of the btquant runner."""

import csv
import json

import pytest

from btquant import ConfigInvalid
from btquant.cli import (
    CSV_COLUMNS,
    ExperimentConfig,
    load_config,
    load_report,
    main,
)

# four levels so the decay-order fit keeps its curvature regressor
SMALL_DIRAC = {
    "model": {"kind": "sphere"},
    "seed": 0,
    "experiments": [{"name": "dirac", "levels": [4, 8, 16, 32]}],
}


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_config_field_names():
    cases = [
        ({"experiments": ["frobnicate"]}, "experiments[0]"),
        ({"model": {"kind": "torus", "tau": 1}}, "model.tau"),
        ({"model": {"kind": "sphere", "tau": [0.0, 1.0]}}, "model.tau"),
        ({"model": {"kind": "torus", "tau": [0.0, -1.0]}}, "model.tau"),
        ({"tolerance": 2.0}, "tolerance"),
        ({"levels": [8, 4]}, "levels"),
        ({"levels": []}, "levels"),
        ({"bogus": 1}, "bogus"),
        ({"observables": ["x9"]}, "observables[0]"),
        ({"format": "xml"}, "format"),
    ]
    for raw, field in cases:
        with pytest.raises(ConfigInvalid) as exc:
            ExperimentConfig(raw)
        assert exc.value.field == field


def test_config_defaults_and_parsing(tmp_path):
    config = load_config(_write(tmp_path, "min.json", {"model": {"kind": "sphere"}}))
    assert config.seed == 0
    assert config.format == "csv"
    assert [e["name"] for e in config.experiments][:2] == ["norm", "dirac"]
    squared = ExperimentConfig({"observables": ["x3^2", "x1*x2"]})
    vals = squared.observables[0].eval(0.5 + 0.2j)
    base = ExperimentConfig({"observables": ["x3"]}).observables[0].eval(0.5 + 0.2j)
    assert abs(vals - base**2) < 1e-12


def test_csv_schema_and_row_order(tmp_path):
    cfg = _write(tmp_path, "cfg.json", SMALL_DIRAC)
    out = tmp_path / "report.csv"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    with open(out, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    body = rows[1:]
    assert all(r[0] == "dirac" and r[1] == "sphere" for r in body)
    levels = [int(r[2]) for r in body]
    # aggregates (level 0) lead, then the per-level rows ascend
    assert levels == sorted(levels)
    assert levels[0] == 0 and set(levels) > {0}
    for r in body:
        float(r[4]), float(r[5]), float(r[6])
        assert r[7] in ("true", "false")


def test_json_round_trip(tmp_path):
    cfg = _write(tmp_path, "cfg.json", dict(SMALL_DIRAC, format="json"))
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    rows, metadata = load_report(str(out))
    assert metadata["config"]["experiments"] == SMALL_DIRAC["experiments"]
    assert "version" in metadata and "wall_time_s" in metadata
    quantities = {(r.level, r.quantity) for r in rows}
    assert (0, "slope") in quantities
    assert all(r.passed for r in rows)


def test_byte_identical_reruns_and_seed_override(tmp_path):
    probe_cfg = {
        "model": {"kind": "sphere"},
        "seed": 0,
        "experiments": [{"name": "berezin", "levels": [4, 6, 8, 12, 16]}],
    }
    cfg = _write(tmp_path, "cfg.json", probe_cfg)
    outs = [tmp_path / f"r{i}.csv" for i in range(3)]
    code_a = main(["--config", cfg, "--out", str(outs[0])])
    code_b = main(["--config", cfg, "--out", str(outs[1])])
    assert code_a == code_b
    assert outs[0].read_bytes() == outs[1].read_bytes()
    main(["--config", cfg, "--out", str(outs[2]), "--seed", "1"])
    # different probe draws move the reported values
    assert outs[0].read_bytes() != outs[2].read_bytes()


def test_exit_code_on_failed_criterion(tmp_path):
    cfg = _write(tmp_path, "strict.json", {
        "model": {"kind": "sphere"},
        "experiments": [{"name": "tuynman", "tolerance": 1e-16, "levels": [2, 3, 4]}],
    })
    out = tmp_path / "strict.csv"
    assert main(["--config", cfg, "--out", str(out)]) == 1
    with open(out, newline="", encoding="utf-8") as fh:
        body = list(csv.reader(fh))[1:]
    star = [r for r in body if r[3] == "c_star"]
    assert star and star[0][7] == "false"


def test_io_and_config_exit_codes(tmp_path):
    cfg = _write(tmp_path, "cfg.json", SMALL_DIRAC)
    missing_dir = tmp_path / "no" / "such" / "dir" / "out.csv"
    assert main(["--config", cfg, "--out", str(missing_dir)]) == 3
    assert main(["--config", str(tmp_path / "absent.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["--config", str(bad)]) == 2
    assert main(["--config", _write(tmp_path, "badfield.json", {"bogus": 1})]) == 2


def test_console_script(tmp_path):
    import subprocess

    cfg = _write(tmp_path, "cfg.json", SMALL_DIRAC)
    out = tmp_path / "script.csv"
    proc = subprocess.run(
        ["btquant", "--config", cfg, "--out", str(out), "--verbose"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "PASS dirac/sphere" in proc.stderr
    assert out.read_text(encoding="utf-8").startswith(",".join(CSV_COLUMNS))
