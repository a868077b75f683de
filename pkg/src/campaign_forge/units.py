"""Human-readable quantity parsing.

Sizes use decimal prefixes (1 GB = 1e9 bytes). Durations accept s/m/h/d.
Bandwidths are written as sizes and read as bytes per second.
"""

from __future__ import annotations

import re

SIZE_SUFFIXES = {"B": 1.0, "KB": 1e3, "MB": 1e6, "GB": 1e9, "TB": 1e12, "PB": 1e15}
COUNT_SUFFIXES = {"K": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}
TIME_SUFFIXES = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)(?:/s)?\s*$")


def _parse(text: str, table: dict[str, float], what: str) -> float:
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"cannot parse {what} {text!r}")
    number, suffix = m.groups()
    if not suffix:
        return float(number)
    scale = table.get(suffix)
    if scale is None:
        # sizes are case-insensitive ("gb", "GB"); time units are not ("m" vs "M")
        if table is not TIME_SUFFIXES:
            scale = table.get(suffix.upper())
        if scale is None:
            raise ValueError(f"unknown {what} suffix {suffix!r} in {text!r}")
    return float(number) * scale


def parse_size(value: str | float | int) -> float:
    """Bytes from ``150GB``, ``20e9`` or a plain number."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return _parse(str(value), SIZE_SUFFIXES, "size")


def parse_duration(value: str | float | int) -> float:
    """Seconds from ``2h``, ``60s``, ``90d`` or a plain number."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return _parse(str(value), TIME_SUFFIXES, "duration")


def parse_count(value: str | float | int) -> float:
    """Plain numbers with optional K/M/G/T multipliers (``70M``, ``1.5e13``)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return _parse(str(value), COUNT_SUFFIXES, "count")
