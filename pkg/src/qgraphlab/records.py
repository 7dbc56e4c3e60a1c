"""Delimited-text result files with hash-stable headers.

Every result file is UTF-8 text: `#`-prefixed header lines carrying
key=value metadata (values JSON-encoded when not plain strings), one
`# columns=` line naming the tab-separated fields, then data rows. Floats
are written with repr so reading the file back reproduces them bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

RECORD_SCHEMA = "qgraphlab.records/1"


@dataclass
class Records:
    header: dict
    columns: tuple
    data: dict


def _encode_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return json.dumps(v, sort_keys=True)


def _decode_value(s: str):
    try:
        return json.loads(s)
    except (json.JSONDecodeError, ValueError):
        return s


def _format_cell(x) -> str:
    if isinstance(x, (np.floating,)):
        x = x.item()
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (np.integer, int, np.bool_, bool)):
        return str(int(x))
    return str(x)


def write_records(path, data: dict, header: dict | None = None) -> Path:
    """Write named columns (equal-length arrays) plus metadata."""
    path = Path(path)
    columns = list(data.keys())
    if not columns:
        raise ConfigurationError("record file needs at least one column")
    arrays = [np.atleast_1d(np.asarray(data[c])) for c in columns]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ConfigurationError("record columns must have equal length")

    lines = [f"# {RECORD_SCHEMA}"]
    for key in sorted(header or {}):
        lines.append(f"# {key}={_encode_value(header[key])}")
    lines.append("# columns=" + "\t".join(columns))
    for i in range(n):
        lines.append("\t".join(_format_cell(a[i]) for a in arrays))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_records(path) -> Records:
    path = Path(path)
    header: dict = {}
    columns: list = []
    rows: list = []
    with path.open(encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {RECORD_SCHEMA}":
            raise ConfigurationError(
                f"{path}: not a record file (got {first!r})")
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                body = line[2:]
                if "=" not in body:
                    continue
                key, value = body.split("=", 1)
                if key == "columns":
                    columns = value.split("\t")
                else:
                    header[key] = _decode_value(value)
            else:
                rows.append(line.split("\t"))
    if not columns:
        raise ConfigurationError(f"{path}: missing columns header")
    data: dict = {}
    for j, name in enumerate(columns):
        cells = [r[j] for r in rows]
        try:
            data[name] = np.array([float(c) for c in cells])
        except ValueError:
            data[name] = cells
    return Records(header=header, columns=tuple(columns), data=data)
