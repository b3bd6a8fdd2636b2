"""CSV and JSON writers for run records.

CSV: a header row of column names, one row per grid point, floats with 17
significant digits, UTF-8 with LF line endings. Complex columns become
``name_re`` and ``name_im``. JSON: ``{"meta": {...}, "data": {column: [...]}}``
with the same column split; NaN is written as ``null``.

The CSV keeps to the bare table, so the effective config travels next to it
as ``<stem>.config.yaml`` (the JSON embeds it as well). Every file is written
to a temporary file in the target directory and then renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import yaml

from .experiments import RunRecord


def split_columns(payload: dict) -> dict:
    """Flatten complex columns into ``_re``/``_im`` pairs, keeping order."""
    out = {}
    for name, values in payload.items():
        if isinstance(values, list) and values and isinstance(values[0], str):
            out[name] = list(values)
            continue
        arr = np.asarray(values)
        if arr.dtype.kind == "U" or arr.dtype.kind == "O":
            out[name] = [str(v) for v in arr]
        elif arr.dtype.kind == "c":
            out[f"{name}_re"] = arr.real.astype(float)
            out[f"{name}_im"] = arr.imag.astype(float)
        else:
            out[name] = arr
    return out


def _format(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return str(int(value))
    return "%.17g" % float(value)


def _jsonable(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    value = float(value)
    return value if math.isfinite(value) else None


def to_csv(record: RunRecord) -> str:
    columns = split_columns(record.payload)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(columns))
    lengths = {len(v) for v in columns.values()}
    nrows = lengths.pop() if lengths else 0
    for i in range(nrows):
        writer.writerow([_format(col[i]) for col in columns.values()])
    return buf.getvalue()


def _plain(obj):
    """Config snapshots and summaries as JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        return _jsonable(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def to_json_document(record: RunRecord) -> dict:
    data = {name: [_jsonable(v) for v in values]
            for name, values in split_columns(record.payload).items()}
    meta = {"config": _plain(record.config), "version": record.version,
            "walltime_s": record.walltime_s, "convergence": _plain(record.convergence),
            "summary": _plain(record.summary)}
    return {"meta": meta, "data": data}


def to_json(record: RunRecord) -> str:
    return json.dumps(to_json_document(record), indent=1, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export(record: RunRecord, directory, formats=("csv", "json"), stem: str | None = None
           ) -> list[Path]:
    """Write the record in each requested format; returns the written paths.

    Raises
    ------
    OSError
        If the directory cannot be created or written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or str(record.config.get("experiment", "run"))
    written = []
    config_path = directory / f"{stem}.config.yaml"
    atomic_write(config_path, yaml.safe_dump(_plain(record.config), sort_keys=False))
    written.append(config_path)
    for fmt in formats:
        if fmt == "csv":
            text = to_csv(record)
        elif fmt == "json":
            text = to_json(record)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        path = directory / f"{stem}.{fmt}"
        atomic_write(path, text)
        written.append(path)
    return written
