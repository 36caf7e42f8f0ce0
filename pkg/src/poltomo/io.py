"""File formats: PTF1 grid fields, JSON reports, checksums.

PTF1 layout (little-endian)::

    b"PTF1"  u32 n  u32 dims[3]  f64 origin[3]  f64 spacing  u8 symmetry
    then dims[0]*dims[1]*dims[2] voxels (row-major, last axis fastest),
    each n*n complex entries (row-major) stored as (re, im) f64 pairs.

Symmetry codes: 0 general, 1 symmetric, 2 skew-hermitian.
"""
import csv
import hashlib
import json
import math
import struct
from io import StringIO

import numpy as np

from .fields import Grid, GridField

PTF_MAGIC = b"PTF1"
SYMMETRY_CODES = {"general": 0, "symmetric": 1, "skew-hermitian": 2}
_CODE_NAMES = {v: k for k, v in SYMMETRY_CODES.items()}
_HEADER = struct.Struct("<4sI3I3ddB")


class FormatError(ValueError):
    pass


def grid_field_bytes(field):
    if field.n < 1 or len(field.grid.dims) != 3:
        raise FormatError("PTF1 stores 3D grids")
    head = _HEADER.pack(PTF_MAGIC, field.n, *map(int, field.grid.dims), *map(float, field.grid.origin),
                        float(field.grid.spacing), SYMMETRY_CODES[field.symmetry])
    vals = np.ascontiguousarray(field.values, dtype="<c16")
    return head + vals.tobytes()


def write_grid_field(path, field):
    data = grid_field_bytes(field)
    with open(path, "wb") as fh:
        fh.write(data)
    return sha256_bytes(data)


def parse_grid_field(data, name="grid"):
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a PTF1 header")
    magic, n, d0, d1, d2, o0, o1, o2, h, code = _HEADER.unpack_from(data)
    if magic != PTF_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if code not in _CODE_NAMES:
        raise FormatError(f"unknown symmetry code {code}")
    count = d0 * d1 * d2 * n * n
    body = data[_HEADER.size:]
    if len(body) != 16 * count:
        raise FormatError(f"payload has {len(body)} bytes, expected {16 * count}")
    vals = np.frombuffer(body, dtype="<c16").reshape(d0, d1, d2, n, n)
    grid = Grid((d0, d1, d2), (o0, o1, o2), h)
    return GridField(vals.astype(complex), grid, _CODE_NAMES[code], name, validate=False)


def read_grid_field(path):
    with open(path, "rb") as fh:
        return parse_grid_field(fh.read(), name=str(path))


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _clean(obj):
    # JSON has no complex, inf or numpy scalars
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(float(obj.real)), "im": _clean(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def report_json(report):
    """Deterministic JSON text (sorted keys, trailing newline)."""
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report):
    text = report_json(report).encode()
    with open(path, "wb") as fh:
        fh.write(text)
    return sha256_bytes(text)


def write_scalar_data(path, rays, values, meta=None, failed=None):
    """Scalar per-ray data (e.g. ``S``): JSON header line, then CSV ``x, xi, tau-, tau+, value, failed``."""
    n = len(rays[0].x) if rays else 0
    failed = np.zeros(len(rays), dtype=bool) if failed is None else failed
    header = dict(meta or {})
    header.update({"n": n, "count": len(rays)})
    buf = StringIO()
    buf.write(json.dumps(_clean(header), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i+1}" for i in range(n)] + [f"xi{i+1}" for i in range(n)] + ["tau_minus", "tau_plus", "value", "failed"])
    for r, v, bad in zip(rays, values, failed):
        w.writerow([repr(float(z)) for z in (*r.x, *r.xi, r.tau_minus, r.tau_plus, np.real(v))] + [int(bad)])
    data = buf.getvalue().encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return sha256_bytes(data)
