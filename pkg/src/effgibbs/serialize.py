"""
Deterministic JSON and CSV output.

Floats are always written in scientific notation with 17 significant digits
so identical inputs give byte-identical files. Complex matrices become
row-major nested lists of ``[re, im]`` pairs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return format(x, ".16e")


def matrix_to_pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _emit(obj: Any, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(matrix_to_pairs(obj) if np.iscomplexobj(obj) else obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            parts: list[str] = []
            for v in obj:
                buf: list[str] = []
                _emit(v, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Serialize to JSON with fixed float formatting; non-finite floats become ``null``."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], comments: Sequence[str] = ()) -> str:
    """
    RFC 4180 CSV (CRLF line endings) preceded by ``#`` comment lines.

    Floats use the same fixed formatting as the JSON output; non-finite
    values are written as ``nan``.
    """
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                s = format_float(v)
                cells.append("nan" if s == "null" else s)
            else:
                cells.append(v)
        writer.writerow(cells)
    return buf.getvalue()
