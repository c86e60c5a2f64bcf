"""Byte-stable CSV / JSON serialization of report rows."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence

FORMATS = ("csv", "json")


def _fmt_number(value):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return None
        return float(f"{value:.9g}")
    return value


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.9g}"
    return str(value)


def render(rows: Sequence[dict], fmt: str, comment: Optional[str] = None) -> str:
    """Serialize rows sharing one column set; ``comment`` becomes a leading ``#`` line in CSV."""
    if not rows:
        raise ValueError("no rows to write")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    columns = list(rows[0])
    for r in rows:
        if list(r) != columns:
            raise ValueError("rows do not share one column set")
    if fmt == "json":
        payload = [{k: _fmt_number(v) for k, v in r.items()} for r in rows]
        return json.dumps(payload, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO(newline="")
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_csv_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_report(rows: Sequence[dict], fmt: str, path: str | Path,
                 comment: Optional[str] = None) -> Path:
    """Render and write atomically; a failed write leaves no partial file."""
    text = render(rows, fmt, comment)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
