"""Experiment records, CSV/JSON-lines persistence, and log-log fits."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

SCHEMA_VERSION = 1


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through ``(log2 x, log2 y)``.

    Returns ``(slope, intercept, r_squared)``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 points for a fit")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs strictly positive values")
    res = stats.linregress(np.log2(xs), np.log2(ys))
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


@dataclass
class ExperimentRecord:
    command: str
    config: dict
    rows: list[dict]
    fits: dict = field(default_factory=dict)
    seed: int | None = None
    timestamp: float = field(default_factory=time.time)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for row in self.rows:
            for key, value in row.items():
                if isinstance(value, float) and not math.isfinite(value):
                    raise ValueError(f"non-finite value in column {key!r}")

    def header(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "fits": self.fits,
            "seed": self.seed,
            "timestamp": self.timestamp,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
        if self.rows:
            writer = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows)
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = [json.dumps({"header": self.header()}, sort_keys=True)]
        lines += [json.dumps(row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def dump(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "jsonl":
            return self.to_jsonl()
        raise ValueError(f"unknown format {fmt!r}")


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value in ("True", "False"):
        return value == "True"
    return value


def parse_record(text: str) -> ExperimentRecord:
    """Read back a record written by :meth:`ExperimentRecord.dump`."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty record")
    if lines[0].startswith("# "):
        header = json.loads(lines[0][2:])
        reader = csv.DictReader(lines[1:])
        rows = [{k: _coerce(v) for k, v in row.items()} for row in reader]
    else:
        first = json.loads(lines[0])
        if "header" not in first:
            raise ValueError("JSON-lines record must start with a header object")
        header = first["header"]
        rows = [json.loads(line) for line in lines[1:] if line.strip()]
    return ExperimentRecord(
        command=header["command"],
        config=header["config"],
        rows=rows,
        fits=header.get("fits", {}),
        seed=header.get("seed"),
        timestamp=header["timestamp"],
        schema_version=header["schema_version"],
    )


def read_record(path) -> ExperimentRecord:
    with open(path) as fh:
        return parse_record(fh.read())


def read_columns(path, x: str, y: str, where: dict | None = None) -> tuple[list[float], list[float]]:
    """Two columns of a record (CSV, optionally without header line)."""
    with open(path) as fh:
        text = fh.read()
    if text.startswith("# ") or text.lstrip().startswith("{"):
        rows = parse_record(text).rows
    else:
        rows = [{k: _coerce(v) for k, v in r.items()} for r in csv.DictReader(text.splitlines())]
    where = where or {}
    rows = [r for r in rows if all(str(r.get(k)) == str(v) for k, v in where.items())]
    if rows and (x not in rows[0] or y not in rows[0]):
        raise KeyError(f"columns {x!r}/{y!r} not found; available: {sorted(rows[0])}")
    return [float(r[x]) for r in rows], [float(r[y]) for r in rows]
