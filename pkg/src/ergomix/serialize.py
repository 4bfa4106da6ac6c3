"""JSON, CSV and raw-binary encodings of distributions and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from ergomix.kernel import Distribution, DoeblinCertificate, Finite, Torus, Window


def space_to_dict(space) -> dict:
    if isinstance(space, Torus):
        return {"kind": "torus", "m": space.m, "n": space.n}
    if isinstance(space, Window):
        return {"kind": "window", "d": space.d, "radius": space.radius}
    return {"kind": "finite", "size": space.size}


def space_from_dict(d):
    kind = d["kind"]
    if kind == "torus":
        return Torus(int(d["m"]), int(d["n"]))
    if kind == "window":
        return Window(int(d["d"]), int(d["radius"]))
    if kind == "finite":
        return Finite(int(d["size"]))
    raise ValueError(f"unknown space kind {kind!r}")


def distribution_to_dict(dist: Distribution) -> dict:
    return {
        "space": space_to_dict(dist.space),
        "values": dist.flat.tolist(),
        "escaped": dist.escaped,
    }


def distribution_from_dict(d) -> Distribution:
    return Distribution(space_from_dict(d["space"]), np.array(d["values"], dtype=float), float(d["escaped"]))


def certificate_to_dict(cert: DoeblinCertificate) -> dict:
    return {
        "n0": cert.n0,
        "epsilon": cert.epsilon,
        "lambda": None if cert.lam is None else distribution_to_dict(cert.lam),
        "set_A": None if cert.set_A is None else list(cert.set_A),
    }


def certificate_from_dict(d) -> DoeblinCertificate:
    lam = None if d["lambda"] is None else distribution_from_dict(d["lambda"])
    set_A = None if d["set_A"] is None else tuple(d["set_A"])
    return DoeblinCertificate(int(d["n0"]), float(d["epsilon"]), lam, set_A)


def save_distribution_binary(dist: Distribution, path) -> tuple[Path, Path]:
    """Write little-endian float64 values plus a JSON sidecar (shape, order, space)."""
    path = Path(path)
    data = path.with_suffix(".bin")
    side = path.with_suffix(".json")
    np.ascontiguousarray(dist.values, dtype="<f8").tofile(data)
    meta = {
        "dtype": "float64-le",
        "shape": list(dist.values.shape),
        "order": "row-major over coordinates",
        "space": space_to_dict(dist.space),
        "escaped": dist.escaped,
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return data, side


def load_distribution_binary(path) -> Distribution:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    values = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(meta["shape"])
    return Distribution(space_from_dict(meta["space"]), values, float(meta["escaped"]))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, NaN as null, infinities as strings."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def csv_text(header, rows) -> str:
    """CSV with floats written by repr, so values round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def sequence_csv(values, start: int = 0) -> str:
    """Two-column "n,value" CSV for a sequence indexed from ``start``."""
    rows = []
    for i, v in enumerate(values):
        v = None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
        rows.append((start + i, v))
    return csv_text(("n", "value"), rows)
