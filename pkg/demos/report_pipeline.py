"""Driving the experiment runner from a config and reading reports back.

Run with: python3 demos/report_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from btquant.cli import load_report, main


def run():
    config = {
        "model": {"kind": "sphere"},
        "seed": 0,
        "experiments": [
            {"name": "dirac", "levels": [4, 8, 16, 32]},
            {"name": "trace", "observables": ["1", "x3^2"]},
            "epsilon",
        ],
    }

    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "config.json"
        cfg.write_text(json.dumps(config, indent=2), encoding="utf-8")

        # CSV is the default format; '-' would stream to stdout instead.
        csv_out = Path(tmp) / "report.csv"
        code = main(["--config", str(cfg), "--out", str(csv_out)])
        print(f"csv run exit code {code}")
        lines = csv_out.read_text(encoding="utf-8").splitlines()
        print("first rows of the report:")
        for line in lines[:6]:
            print("  " + line)

        # The JSON format adds run metadata and can be re-ingested.
        json_out = Path(tmp) / "report.json"
        main(["--config", str(cfg), "--format", "json", "--out", str(json_out)])
        rows, metadata = load_report(str(json_out))
        print(f"\njson report: {len(rows)} rows, "
              f"version {metadata['version']}, "
              f"wall time {metadata['wall_time_s']:.2f}s")
        slopes = [r for r in rows if r.quantity == "slope"]
        for row in slopes:
            print(f"  {row.experiment} slope {row.value.real:.4f} "
                  f"pass={row.passed}")


if __name__ == "__main__":
    run()
