"""Serialization helpers for JSON-lines and CSV output.

Floats are written with 17 significant digits so every value round-trips
exactly; keys keep insertion order so identical records give identical bytes.
"""

from __future__ import annotations

import json
from typing import Any, Sequence


def _float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    return format(x, ".17g")


def dumps(obj: Any) -> str:
    """Compact JSON with fixed 17-significant-digit floats."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(int(obj))
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_cell(value: Any) -> str:
    """Sequences become space-separated cells; floats use 17 digits."""
    if isinstance(value, (list, tuple)):
        return " ".join(csv_cell(v) for v in value)
    if isinstance(value, float):
        return _float(value)
    return str(value)


def csv_line(values: Sequence[Any]) -> str:
    cells = [csv_cell(v) for v in values]
    for c in cells:
        if any(ch in c for ch in ',"\n'):
            raise ValueError(f"cell needs quoting: {c!r}")
    return ",".join(cells)
