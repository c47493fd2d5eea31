"""Structured run record emitted by every CLI command."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__

REPORT_FORMAT = 1
CSV_COLUMNS = ["name", "value", "exact", "kind", "level", "truncation", "seed", "stderr", "note"]


def jsonable(x: Any) -> Any:
    """Recursively convert numpy/Fraction/complex values for json.dumps."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return {"fraction": f"{x.numerator}/{x.denominator}", "float": float(x)}
    if isinstance(x, complex):
        return {"real": x.real, "imag": x.imag}
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "to_json"):
        return jsonable(x.to_json())
    return x


@dataclass
class ReportValue:
    """A computed number with the metadata needed to reproduce it."""

    name: str
    value: Any
    kind: str = ""
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "value": jsonable(self.value), "kind": self.kind, "meta": jsonable(self.meta)}

    def csv_row(self) -> dict:
        v = self.value
        exact = ""
        if isinstance(v, Fraction):
            exact = f"{v.numerator}/{v.denominator}"
            v = float(v)
        elif isinstance(v, int):
            exact = str(v)
        elif isinstance(v, complex):
            v = v.real
        if not isinstance(v, (int, float)):
            v = json.dumps(jsonable(v), sort_keys=True)
        m = self.meta
        return {
            "name": self.name,
            "value": v,
            "exact": exact,
            "kind": self.kind,
            "level": m.get("level", ""),
            "truncation": m.get("truncation", ""),
            "seed": m.get("seed", ""),
            "stderr": m.get("stderr", ""),
            "note": m.get("note", ""),
        }


@dataclass
class ExperimentReport:
    command: str
    config: Dict[str, Any]
    values: List[ReportValue] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    cached: bool = False
    error: Optional[dict] = None
    version: str = __version__

    def add(self, name: str, value: Any, kind: str = "", **meta) -> ReportValue:
        rv = ReportValue(name, value, kind, meta)
        self.values.append(rv)
        return rv

    def value(self, name: str) -> Any:
        for rv in self.values:
            if rv.name == name:
                return rv.value
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": self.version,
            "command": self.command,
            "config": jsonable(self.config),
            "values": [v.to_json() for v in self.values],
            "timings": self.timings,
            "warnings": self.warnings,
            "cached": self.cached,
            "error": self.error,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for v in self.values:
            w.writerow(v.csv_row())
        return buf.getvalue()
