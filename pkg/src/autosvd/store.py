"""Flat binary container for models and feature matrices.

Layout::

    b"AUTOSVD\\x00"              8-byte magic
    uint64 little-endian        length of the JSON header in bytes
    JSON header (UTF-8)         {"kind", "meta", "arrays": [{"name", "shape", "dtype"}],
                                 "byteorder": "little", "order": "C"}
    raw array data              each array in header order, row-major,
                                little-endian IEEE-754 float64 (or int64)

The header is written with sorted keys and no timestamps, so saving the same
object twice yields identical bytes.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AUTOSVD\x00"
_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class FormatError(ValueError):
    pass


def _as_storable(arr):
    arr = np.asarray(arr)
    if arr.dtype.kind == "f":
        return np.ascontiguousarray(arr, dtype="<f8")
    if arr.dtype.kind in "iub":
        return np.ascontiguousarray(arr, dtype="<i8")
    raise TypeError(f"cannot store array of dtype {arr.dtype}")


def write_container(path, kind, meta, arrays):
    """Write ``arrays`` (name -> ndarray) and a JSON-able ``meta`` dict to ``path``."""
    stored = {name: _as_storable(a) for name, a in arrays.items()}
    header = {
        "kind": kind,
        "meta": meta,
        "byteorder": "little",
        "order": "C",
        "arrays": [
            {"name": name, "shape": list(a.shape), "dtype": a.dtype.str}
            for name, a in stored.items()
        ],
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for a in stored.values():
            fh.write(a.tobytes(order="C"))
    return path


def read_container(path, kind=None):
    """Return ``(meta, arrays)``; raises :class:`FormatError` on a bad file."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not an autosvd container")
    (n,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + n].decode("utf-8"))
    if kind is not None and header["kind"] != kind:
        raise FormatError(f"{path}: expected a {kind!r} container, found {header['kind']!r}")
    offset = 16 + n
    arrays = {}
    for spec in header["arrays"]:
        dtype = _DTYPES[spec["dtype"]]
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(data):
            raise FormatError(f"{path}: truncated array {spec['name']!r}")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        arrays[spec["name"]] = arr.reshape(spec["shape"]).astype(dtype.newbyteorder("="))
        offset = end
    return header["meta"], arrays


def checksum(arr):
    """sha256 of the stored (little-endian float64) representation."""
    return hashlib.sha256(_as_storable(arr).tobytes()).hexdigest()
