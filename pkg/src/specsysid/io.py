"""Matrix CSV files, block-description JSON and report serialisation.

Complex entries are written as ``a+bi`` / ``a-bi`` and pure reals as ``a``.
Floats use Python's shortest round-trip representation.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"


def format_complex(z):
    z = complex(z)
    if z.imag == 0.0:
        return repr(z.real)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def parse_complex(text):
    s = text.strip().replace(" ", "")
    if not s:
        raise ValueError("empty matrix entry")
    if s.endswith("i"):
        s = s[:-1] + "j"
    try:
        return complex(s)
    except ValueError as exc:
        raise ValueError(f"cannot parse matrix entry {text!r}") from exc


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = [[parse_complex(c) for c in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValueError(f"{path}: ragged rows")
    M = np.array(rows, dtype=complex)
    return M.real.copy() if np.all(M.imag == 0) else M


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([format_complex(v) for v in row])


def load_blocks(spec):
    """Parse a block description given inline or as a path.

    The document looks like ``{"blocks": [{"lambda": [re, im], "size": m}, ...],
    "basis": "path-or-null"}``; a relative basis path is resolved against the
    document's directory. Returns ``(blocks, basis_or_None)``.
    """
    text = spec.strip()
    base = Path.cwd()
    if not text.startswith("{"):
        path = Path(text)
        if not path.exists():
            raise ValueError(f"blocks file {path} does not exist")
        base = path.parent
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid blocks JSON: {exc}") from exc
    if not isinstance(doc, dict) or "blocks" not in doc:
        raise ValueError('blocks JSON must be an object with a "blocks" list')
    blocks = []
    for b in doc["blocks"]:
        lam = b["lambda"]
        lam = complex(lam[0], lam[1]) if isinstance(lam, (list, tuple)) else complex(lam)
        size = b["size"]
        if int(size) != size or size < 1:
            raise ValueError(f"block size must be a positive integer, got {size!r}")
        blocks.append((lam, int(size)))
    basis = doc.get("basis")
    if basis is not None:
        p = Path(basis)
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise ValueError(f"basis file {p} does not exist")
        basis = read_matrix_csv(p)
    return blocks, basis


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "NaN"
        if math.isinf(f):
            return "Infinity" if f > 0 else "-Infinity"
        return f
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        if z.imag == 0:
            return to_jsonable(z.real)
        return {"re": to_jsonable(z.real), "im": to_jsonable(z.imag)}
    if isinstance(obj, (str, type(None))):
        return obj
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def make_report(command, config, result, seed=None, claims=None):
    from . import __version__

    return {
        "schema": SCHEMA_VERSION,
        "toolkit": "specsysid",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "claims": claims or [],
        "result": result,
    }


def dumps(report):
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report):
    text = dumps(report)
    if path is None:
        print(text, end="")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def strip_volatile(report):
    """Copy of a report without the timestamp, for reproducibility checks."""
    out = dict(report)
    out.pop("timestamp", None)
    return out
