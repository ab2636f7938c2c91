"""JSON reports: 17 significant digits, stable key order, one timestamp field."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import enum
import hashlib
import math

import numpy as np

from .config import SPEC_VERSION


def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def plain(obj):
    """Reduce numpy, enum and dataclass values to JSON-shaped Python objects."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, enum.Enum):
        return plain(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "as_dict"):
        return plain(obj.as_dict())
    if dataclasses.is_dataclass(obj):
        return plain({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_string(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _num(obj)
    if obj is None:
        return "null"
    return _string(obj)


def _string(s) -> str:
    import json

    return json.dumps(str(s), ensure_ascii=False)


def dumps(obj, indent: int = 2) -> str:
    """Serialise with every float written as ``%.17g`` (``NaN``/``Infinity`` tokens)."""
    return _encode(plain(obj), indent, 0) + "\n"


def digest(inputs) -> str:
    return hashlib.sha256(dumps(inputs, indent=0).encode("utf-8")).hexdigest()


def build_report(command: str, argv, inputs, results, tolerances, warnings_=(), timestamp: str | None = None) -> dict:
    """Assemble the report document; everything except ``timestamp`` is a pure function of the inputs."""
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "spec_version": SPEC_VERSION,
        "command": command,
        "argv": list(argv),
        "inputs_digest": digest(inputs),
        "inputs": plain(inputs),
        "results": plain(results),
        "tolerances": plain(tolerances),
        "warnings": sorted({str(w) for w in warnings_}),
        "timestamp": timestamp,
    }
