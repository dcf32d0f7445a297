"""Row persistence: CSV with exact hex companions, or a JSON array."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    seen = set()
    for row in rows:
        for key, val in row.items():
            names = [key]
            if isinstance(val, float) and f"{key}_hex" not in row:
                names.append(f"{key}_hex")
            for name in names:
                if name not in seen:
                    seen.add(name)
                    cols.append(name)
    return cols


def _plain(val):
    if isinstance(val, np.generic):
        val = val.item()
    return val


def csv_cells(row: dict) -> dict:
    out = {}
    for key, val in row.items():
        val = _plain(val)
        if isinstance(val, bool):
            out[key] = "true" if val else "false"
        elif isinstance(val, float):
            out[key] = repr(val)
            out.setdefault(f"{key}_hex", val.hex())
        else:
            out[key] = val
    return out


def json_value(val):
    val = _plain(val)
    if isinstance(val, float) and not math.isfinite(val):
        return repr(val)  # "inf", "-inf" or "nan"; JSON has no literal for these
    if isinstance(val, (list, tuple)):
        return [json_value(v) for v in val]
    return val


def write_rows(rows: list[dict], path, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=_columns(rows), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(csv_cells(row))
    elif fmt == "json":
        data = [{k: json_value(v) for k, v in row.items()} for row in rows]
        path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
