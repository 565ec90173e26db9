"""Deterministic report files: JSON per bound, CSV tables, manifest."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

DEVIATION_COLUMNS = ("episode", "t", "state_dev", "repr_dev", "policy_dev", "reward_dev")
SUMMARY_COLUMNS = ("t",) + tuple(
    f"{k}_{stat}" for k in DEVIATION_COLUMNS[2:] for stat in ("mean", "std")
)
SCALING_COLUMNS = ("n", "estimate", "std_err")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        # strict JSON has no infinities
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def emit_reports(reports: dict, manifest, out_dir, *, deviations=None, scaling=None) -> list:
    """Write every output file and return their paths relative to ``out_dir``.

    ``manifest.json`` lists the files it references; it is written last so
    every listed file already exists.
    """
    out_dir = Path(out_dir)
    (out_dir / "reports").mkdir(parents=True, exist_ok=True)
    files = []
    for name, rep in reports.items():
        rel = f"reports/{name}.json"
        _write_text(out_dir / rel, dumps(rep))
        files.append(rel)
    if deviations is not None:
        _write_csv(out_dir / "deviations.csv", DEVIATION_COLUMNS, deviations.rows())
        _write_csv(out_dir / "deviation_summary.csv", SUMMARY_COLUMNS, deviations.summary_rows())
        files += ["deviations.csv", "deviation_summary.csv"]
    if scaling is not None:
        rows = zip(scaling.ns, scaling.estimates, scaling.std_errs)
        _write_csv(out_dir / "rademacher_scaling.csv", SCALING_COLUMNS, rows)
        files.append("rademacher_scaling.csv")
    _write_text(out_dir / "run_info.json", dumps({"wall_clock_s": manifest.wall_clock_s}))
    files.append("run_info.json")
    manifest.files = files
    _write_text(out_dir / "manifest.json", dumps(manifest.to_dict()))
    return files + ["manifest.json"]
