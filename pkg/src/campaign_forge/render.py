"""Text renderings of result objects: canonical JSON, CSV and aligned tables.

Tables are for people and are lossy: floats are shown with six significant
digits and nested maps are dropped. JSON and CSV keep full precision.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from typing import Any

from .errors import UnsupportedFormat
from .sim import EventTrace

FORMATS = ("json", "csv", "table")


def jsonable(value: Any) -> Any:
    """Plain JSON data for ``value``; non-finite floats become strings."""
    if isinstance(value, EventTrace):
        return {"header": value.header(), "events": [e.to_record() for e in value.events]}
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if hasattr(value, "item"):  # numpy scalar
        return jsonable(value.item())
    return value


def _tabular(value: Any) -> tuple[list[str], list[dict]]:
    if hasattr(value, "records") and hasattr(value, "columns"):
        return list(value.columns), value.records()
    if isinstance(value, EventTrace):
        return ["time", "seq", "kind"], [{"time": e.time, "seq": e.seq, "kind": e.kind} for e in value.events]
    if isinstance(value, dict):
        return ["metric", "value"], [{"metric": k, "value": v} for k, v in value.items() if not isinstance(v, (dict, list))]
    if isinstance(value, list) and all(isinstance(r, dict) for r in value):
        cols = list(value[0]) if value else []
        return cols, value
    raise UnsupportedFormat(f"cannot tabulate a {type(value).__name__}")


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return ""
    return str(v)


def render(fmt: str, value: Any) -> str:
    """Render ``value`` as ``json``, ``csv`` or ``table`` text (newline-terminated)."""
    if fmt == "json":
        if isinstance(value, EventTrace):
            return value.to_ndjson()
        return json.dumps(jsonable(value), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        if isinstance(value, EventTrace):
            return value.to_csv()
        cols, rows = _tabular(value)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r.get(c)) if isinstance(r.get(c), float) else r.get(c) for c in cols])
        return buf.getvalue()
    if fmt == "table":
        cols, rows = _tabular(value)
        cells = [[_cell(r.get(c)) for c in cols] for r in rows]
        widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row in cells:
            lines.append("  ".join(x.rjust(w) if _numeric(x) else x.ljust(w) for x, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"
    raise UnsupportedFormat(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def _numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True
