"""Canonical JSON serialization for all file formats.

Floats are written with 17 significant digits, which round-trips IEEE-754
doubles exactly; output is compact and key order is preserved, so
save -> load -> save is byte-identical. Writes are atomic (tmp + rename).
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import DataError


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not np.isfinite(f):
            if np.isnan(f):
                raise DataError("cannot serialize NaN")
            return '"Infinity"' if f > 0 else '"-Infinity"'
        return format(f, ".17g")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if isinstance(v, np.ndarray):
        return _fmt(v.tolist())
    if v is None:
        return "null"
    raise TypeError(f"cannot serialize {type(v)!r}")


def dumps_canonical(obj) -> str:
    return _fmt(obj) + "\n"


def save_json(path: str, obj) -> None:
    text = dumps_canonical(obj)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise DataError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON in {path}: {e}") from e
