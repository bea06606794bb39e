"""Run records and tabular outputs.

A run record is one JSON document per CLI invocation. Everything except
``header`` is a pure function of the inputs; ``header`` holds the timestamp
and is ignored by :func:`stable_payload`.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema

from . import __version__
from .exceptions import SchemaError

SCHEMA_VERSION = "1"
COMMANDS = ("replicate", "sweep-detect", "simulate", "calibrate-cost")

SWEEP_HEADER = ("k", "f", "r", "q", "p_detect")
SIMULATE_HEADER = ("k", "f", "r", "q", "trials", "exact_detect", "empirical_detect", "abs_error",
                   "three_sigma", "within_3sigma")
REPLICATE_HEADER = ("claim", "start", "end", "verdict", "first_mismatch", "expected", "prefill_tokens",
                    "decode_tokens")
CALIBRATE_HEADER = ("label", "seconds", "ratio", "reported_ratio", "predicted_seconds", "relative_residual")

RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "tool_version", "command", "header", "config", "results"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "tool_version": {"type": "string"},
        "command": {"enum": list(COMMANDS)},
        "header": {
            "type": "object",
            "required": ["timestamp"],
            "properties": {"timestamp": {"type": "string"}},
        },
        "config": {"type": "object"},
        "results": {"type": "object"},
    },
    "additionalProperties": False,
}


def make_record(command: str, config: dict, results: dict) -> dict:
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "header": {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")},
        "config": config,
        "results": results,
    }
    validate_record(record)
    return record


def validate_record(record: Any) -> None:
    if not isinstance(record, dict):
        raise SchemaError("run record must be a JSON object")
    version = record.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    try:
        jsonschema.validate(record, RECORD_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message) from None


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def write_record(record: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps_record(record))
    return path


def load_record(path: str | Path) -> dict:
    record = json.loads(Path(path).read_text())
    validate_record(record)
    return record


def stable_payload(record: dict) -> str:
    """Canonical text of everything but the mutable header."""
    return json.dumps({k: v for k, v in record.items() if k != "header"}, sort_keys=True)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def json_rows_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    return json.dumps([dict(zip(header, row)) for row in rows], indent=2) + "\n"


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
