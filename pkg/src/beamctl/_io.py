"""Small serialization helpers shared by the modules and the CLI."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """17 significant digits, so floats round-trip exactly."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".17g")


def cplx(z) -> dict:
    z = complex(z)
    return {"re": float(z.real), "im": float(z.imag)}


def uncplx(d) -> complex:
    if isinstance(d, dict):
        return complex(d["re"], d["im"])
    return complex(d)


def _default(o):
    if isinstance(o, complex):
        return cplx(o)
    if isinstance(o, np.complexfloating):
        return cplx(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _scrub(o):
    # json has no inf/nan; map them to strings so output stays strict
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if isinstance(o, dict):
        return {str(k): _scrub(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_scrub(v) for v in o]
    return o


def dumps(obj) -> str:
    raw = json.loads(json.dumps(obj, default=_default))
    return json.dumps(_scrub(raw), indent=2, sort_keys=True, allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int)) and not isinstance(v, bool) else fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return header, data.reshape(-1, len(header))
