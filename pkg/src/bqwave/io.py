"""Persistence: binary grid dumps, JSON with full precision, CSV tables.

BQFL layout (little-endian)::

    b"BQFL" | version u32 | meta_len u32 | meta (UTF-8 JSON) | n_records u32
    per record: name_len u32 | name | ndim u32 | dims u64[ndim]
                | spacings f64[ndim] | origin f64[ndim] | payload f64 (row-major)
"""

from __future__ import annotations

import hashlib
import io as _io
import json
import math
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BQFL"
VERSION = 1


class FormatError(ValueError):
    pass


# -- JSON ----------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_json(obj, indent: int = 1, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent, _level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj) \
            + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(str(obj))


def write_json(path, obj):
    Path(path).write_text(to_json(obj) + "\n")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(to_json(cfg).encode()).hexdigest()[:16]


# -- CSV -------------------------------------------------------------------------

def write_csv(path, columns, rows, header: dict | None = None):
    """CSV with '# key=value' comment lines first; floats use 17 digits."""
    buf = _io.StringIO()
    for k in sorted(header or {}):
        buf.write(f"# {k}={header[k]}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                cells.append(_fmt_float(float(v)).strip('"'))
            else:
                cells.append(str(v))
        buf.write(",".join(cells) + "\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """(header dict, columns, rows as lists of strings)."""
    header, rows, cols = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k] = v
        elif cols is None:
            cols = line.split(",")
        elif line:
            rows.append(line.split(","))
    return header, cols, rows


# -- BQFL ------------------------------------------------------------------------

def write_bqfl(path, records: dict, meta: dict | None = None):
    """records: name -> (array, spacings, origin)."""
    meta_b = to_json(meta or {}).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(meta_b)))
        fh.write(meta_b)
        fh.write(struct.pack("<I", len(records)))
        for name in records:
            arr, sp, org = records[name]
            arr = np.ascontiguousarray(arr, dtype="<f8")
            nb = name.encode()
            nd = arr.ndim
            sp = np.broadcast_to(np.asarray(sp, dtype="<f8"), (nd,))
            org = np.broadcast_to(np.asarray(org, dtype="<f8"), (nd,))
            fh.write(struct.pack("<I", len(nb)) + nb)
            fh.write(struct.pack("<I", nd))
            fh.write(np.asarray(arr.shape, dtype="<u8").tobytes())
            fh.write(sp.tobytes())
            fh.write(org.tobytes())
            fh.write(arr.tobytes(order="C"))


def read_bqfl(path):
    """(meta, {name: (array, spacings, origin)})."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: not a BQFL file")
    pos = 4

    def take(fmt):
        nonlocal pos
        out = struct.unpack_from(fmt, data, pos)
        pos += struct.calcsize(fmt)
        return out

    version, mlen = take("<II")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    meta = json.loads(data[pos:pos + mlen].decode())
    pos += mlen
    (n,) = take("<I")
    recs = {}
    for _ in range(n):
        (ln,) = take("<I")
        name = data[pos:pos + ln].decode()
        pos += ln
        (nd,) = take("<I")
        dims = np.frombuffer(data, "<u8", nd, pos).astype(int)
        pos += 8 * nd
        sp = np.frombuffer(data, "<f8", nd, pos).copy()
        pos += 8 * nd
        org = np.frombuffer(data, "<f8", nd, pos).copy()
        pos += 8 * nd
        size = int(np.prod(dims))
        arr = np.frombuffer(data, "<f8", size, pos).reshape(tuple(dims)).copy()
        pos += 8 * size
        recs[name] = (arr, sp, org)
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, recs
