"""Tables and summaries written by the command line.

CSV files are comma separated with LF line endings, a header row and
floats written with 17 significant digits (locale independent).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


@dataclass
class Table:
    header: list[str]
    rows: list[list]

    @classmethod
    def from_columns(cls, **columns) -> "Table":
        names = list(columns)
        cols = [np.asarray(c) if not np.isscalar(c) else None for c in columns.values()]
        n = max(len(c) for c in cols if c is not None)
        full = [c if c is not None else np.full(n, columns[k]) for k, c in zip(names, cols)]
        return cls(names, [list(r) for r in zip(*full)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([fmt(v) for v in row])

    def to_json(self) -> dict:
        return {"header": self.header,
                "rows": [[_json_value(v) for v in row] for row in self.rows]}


def _json_value(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return None if not math.isfinite(v) else v


def series_table(series, axis: str = "t") -> Table:
    se = series.stderr if series.stderr is not None else np.zeros(len(series))
    n = series.meta.get("n", 1)
    return Table.from_columns(**{axis: series.t, "value": series.value, "stderr": se, "n": n})


def profile_table(profile, axis: str = "x") -> Table:
    se = profile.stderr if profile.stderr is not None else np.zeros(len(profile.x))
    n = profile.meta.get("n", 1)
    return Table.from_columns(**{axis: profile.x, "value": profile.value, "stderr": se, "n": n})


@dataclass
class OutputRecord:
    """Named tables plus a JSON summary that embeds the exact config and seed."""

    command: str
    config: dict
    base_seed: int
    tables: dict[str, Table] = field(default_factory=dict)
    derived: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"command": self.command, "version": __version__,
                "base_seed": self.base_seed, "config": self.config,
                "derived": self.derived, "tables": sorted(self.tables)}

    def write(self, out_dir, fmt: str = "csv") -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        if fmt == "csv":
            for name, table in self.tables.items():
                path = os.path.join(out_dir, f"{name}.csv")
                table.to_csv(path)
                written.append(path)
            path = os.path.join(out_dir, "summary.json")
            _dump(self.summary(), path)
        elif fmt == "json":
            doc = self.summary()
            doc["tables"] = {k: t.to_json() for k, t in self.tables.items()}
            path = os.path.join(out_dir, f"{self.command}.json")
            _dump(doc, path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
        return written


def _dump(doc, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return _json_value(o)
    if isinstance(o, np.ndarray):
        return [_json_default(v) for v in o]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def clean(obj):
    """Replace NaN/inf by None so a summary stays strict JSON."""
    if isinstance(obj, dict):
        return {k: clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _json_value(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
