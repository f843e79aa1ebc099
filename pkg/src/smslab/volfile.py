"""Bit-exact binary container for volumes (CXV1) plus sidecar metadata.

Layout, all little-endian:

    offset 0   magic      4 bytes  b"CXV1"
    offset 4   version    u16      currently 1
    offset 6   kind       u8       0 complex64, 1 float32, 2 uint8 mask
    offset 7   ndim       u8
    offset 8   dims       ndim x u32, axis order (coil, slice/band, a, b, t)
    then       payload    row-major; complex64 stored as interleaved
                          (re, im) IEEE-754 binary32 pairs

Axes that do not apply are simply absent (e.g. a single-coil stack has
ndim 4).  Reads validate magic, version, kind, and payload length and
raise :class:`smslab.errors.CorruptFile` naming the failing field and
byte offset.  Write-then-read is the identity on bytes.

The sidecar metadata file is plain text, one ``key = value`` per line.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from .errors import CorruptFile, InvalidInput

__all__ = ["write_volume", "read_volume", "write_metadata", "read_metadata"]

MAGIC = b"CXV1"
VERSION = 1

KIND_COMPLEX64 = 0
KIND_FLOAT32 = 1
KIND_UINT8 = 2

_KIND_DTYPES = {
    KIND_COMPLEX64: np.dtype("<c8"),
    KIND_FLOAT32: np.dtype("<f4"),
    KIND_UINT8: np.dtype("u1"),
}

_HEADER_FIXED = struct.Struct("<4sHBB")


def _kind_for(arr: np.ndarray) -> int:
    if np.issubdtype(arr.dtype, np.complexfloating):
        return KIND_COMPLEX64
    if np.issubdtype(arr.dtype, np.floating):
        return KIND_FLOAT32
    if arr.dtype == np.uint8 or arr.dtype == bool:
        return KIND_UINT8
    raise InvalidInput(f"unsupported dtype {arr.dtype} for volume file")


def write_volume(path, data) -> None:
    """Write an array as a CXV1 file (complex/float data stored in 32-bit)."""
    arr = np.asarray(data)
    if arr.ndim < 1:
        raise InvalidInput("cannot write a 0-dimensional volume")
    kind = _kind_for(arr)
    payload = np.ascontiguousarray(arr.astype(_KIND_DTYPES[kind], copy=False))
    header = _HEADER_FIXED.pack(MAGIC, VERSION, kind, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def read_volume(path) -> np.ndarray:
    """Read a CXV1 file, validating every header field and the length."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_FIXED.size:
        raise CorruptFile(
            f"truncated header: file is {len(blob)} bytes, need {_HEADER_FIXED.size} (offset 0)"
        )
    magic, version, kind, ndim = _HEADER_FIXED.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CorruptFile(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise CorruptFile(f"unsupported version {version} at offset 4, expected {VERSION}")
    if kind not in _KIND_DTYPES:
        raise CorruptFile(f"unknown kind {kind} at offset 6")
    if ndim < 1:
        raise CorruptFile(f"invalid ndim {ndim} at offset 7")
    dims_end = _HEADER_FIXED.size + 4 * ndim
    if len(blob) < dims_end:
        raise CorruptFile(
            f"truncated dims: file is {len(blob)} bytes, need {dims_end} (offset {_HEADER_FIXED.size})"
        )
    dims = struct.unpack_from(f"<{ndim}I", blob, _HEADER_FIXED.size)
    if any(d < 1 for d in dims):
        raise CorruptFile(f"invalid dims {dims} at offset {_HEADER_FIXED.size}")
    dtype = _KIND_DTYPES[kind]
    expected = int(np.prod(dims)) * dtype.itemsize
    actual = len(blob) - dims_end
    if actual != expected:
        raise CorruptFile(
            f"payload length {actual} bytes, expected {expected} (offset {dims_end})"
        )
    flat = np.frombuffer(blob, dtype=dtype, offset=dims_end)
    return flat.reshape(dims).copy()


def write_metadata(path, entries: Mapping) -> None:
    """Plain-text sidecar: one ``key = value`` line per entry, sorted."""
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidInput(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
