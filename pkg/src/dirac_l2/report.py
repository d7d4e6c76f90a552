"""Run configurations and versioned report documents.

A report entry stores its numbers plus a list of checks ``(value, op, threshold)``
so that pass/fail can be recomputed from the file alone.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

SCHEMA_VERSION = "1.0"
OUTDIR_ENV = "DIRAC_L2_OUTDIR"
DEFAULT_OUTDIR = "dirac_l2_out"

_OPS = {
    "<=": lambda v, t: v <= t,
    ">=": lambda v, t: v >= t,
    "<": lambda v, t: v < t,
    ">": lambda v, t: v > t,
    "==": lambda v, t: v == t,
}


def plain(x: Any) -> Any:
    """JSON-ready copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclass
class RunConfig:
    """Everything needed to rerun a subcommand; round-trips through JSON exactly."""

    command: str
    n: int | None = None
    weight: str | None = None
    weight_params: dict = field(default_factory=dict)
    domain: str | None = None
    quadrature: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_json(Path(path).read_text())


def check(name: str, value, op: str, threshold) -> dict:
    if op not in _OPS:
        raise ValueError(f"unknown comparison {op!r}")
    value = plain(value)
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and _OPS[op](value, threshold)
    return {"name": name, "value": value, "op": op, "threshold": plain(threshold), "passed": bool(ok)}


def recompute_check(c: dict) -> bool:
    v = c["value"]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        return False
    return bool(_OPS[c["op"]](v, c["threshold"]))


@dataclass
class Entry:
    kind: str
    label: str
    values: dict
    checks: list[dict]
    trial: int | None = None
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "label": self.label, "trial": self.trial, "values": plain(self.values),
                "checks": self.checks, "passed": self.passed, "wall_clock": self.wall_clock}


@dataclass
class ReportFile:
    config: RunConfig
    entries: list[Entry] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "config": self.config.to_dict(),
                "entries": [e.to_dict() for e in self.entries], "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)


def load_schema() -> dict:
    return json.loads(resources.files("dirac_l2").joinpath("report_schema.json").read_text())


def validate(doc: dict) -> None:
    """Raises ``jsonschema.ValidationError`` when ``doc`` does not match the published schema."""
    jsonschema.validate(doc, load_schema())


def recompute_passed(doc: dict) -> bool:
    """Overall verdict from stored values and thresholds only."""
    return all(recompute_check(c) for e in doc["entries"] for c in e["checks"])


def strip_timing(doc: dict) -> dict:
    """Copy of a report document without wall-clock fields, for reproducibility comparisons."""
    out = json.loads(json.dumps(doc))
    for e in out["entries"]:
        e.pop("wall_clock", None)
    return out


def output_dir(explicit: str | None = None) -> Path:
    return Path(explicit or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def write_report(report: ReportFile, outdir) -> list[Path]:
    """``report.json`` plus one flat CSV per entry kind."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    validate(doc)
    paths = [outdir / "report.json"]
    paths[0].write_text(report.to_json() + "\n")
    kinds: dict[str, list[dict]] = {}
    for e in doc["entries"]:
        row = {"label": e["label"], "trial": e["trial"], "passed": e["passed"], **_flatten(e["values"])}
        kinds.setdefault(e["kind"], []).append(row)
    for kind, rows in kinds.items():
        cols = list(dict.fromkeys(k for r in rows for k in r))
        p = outdir / f"{kind}.csv"
        with p.open("w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols)
            wr.writeheader()
            wr.writerows(rows)
        paths.append(p)
    return paths
