"""Atomic output files, 17-digit CSV and hashed JSON reports."""
import hashlib
import json
import math
import os
import tempfile

import numpy as np


def atomic_write(path, text):
    """Write ``text`` to a temporary file in the target directory and rename it into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(x):
    """CSV cell: bools as true/false, integers verbatim, floats at 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x) + 0.0:.17g}"


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    text = csv_text(header, rows)
    atomic_write(path, text)
    return text


def read_csv(text):
    """Parse a CSV written by :func:`write_csv` into (header, list of float rows)."""
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    conv = {"true": 1.0, "false": 0.0, "": math.nan}
    rows = [[conv[c] if c in conv else float(c) for c in ln.split(",")] for ln in lines[1:]]
    return header, rows


def jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def canonical_json(obj):
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def content_hash(obj):
    """SHA-256 of the canonical JSON encoding."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_report(path, config, payload):
    """JSON report with the resolved config, its hash and the command payload."""
    doc = {"config": config, "config_hash": content_hash(config)}
    doc.update(payload)
    text = json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"
    atomic_write(path, text)
    return doc
