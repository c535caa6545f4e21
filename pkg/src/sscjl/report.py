"""Experiment report document (JSON) and newline-delimited raw dumps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

SCHEMA = "sscjl-report"
SCHEMA_VERSION = 1

# fields excluded when comparing reports for determinism
VOLATILE_FIELDS = ("wall_clock_seconds",)


def plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples into JSON types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # strict JSON has no NaN/inf
        return v if math.isfinite(v) else None
    return obj


@dataclass
class Verdict:
    criterion: str
    passed: bool
    value: Any
    threshold: Any
    margin: Any = None
    detail: str = ""

    def to_dict(self):
        return plain(self.__dict__)


@dataclass
class ExperimentReport:
    kind: str
    seed: int
    params: dict
    config: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    overlays: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall_clock_seconds: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "params": plain(self.params),
            "config": plain(self.config),
            "estimates": plain(self.estimates),
            "overlays": plain(self.overlays),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": self.passed,
            "warnings": list(self.warnings),
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def comparable(doc: dict) -> dict:
    """Drop fields that legitimately differ between identical runs."""
    return {k: v for k, v in doc.items() if k not in VOLATILE_FIELDS}


def write_ndjson(path, records: Iterable[dict]) -> None:
    with open(Path(path), "w") as fh:
        for rec in records:
            fh.write(json.dumps(plain(rec), sort_keys=True) + "\n")
