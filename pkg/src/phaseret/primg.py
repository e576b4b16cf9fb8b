"""Reader and writer for the PRIMG raster container.

Layout (little endian)::

    bytes 0-5   magic b"PRIMG\\0"
    u32         version (1)
    u32         d, number of axes
    u32 * d     side lengths
    u8          kind: 0 = real float64, 1 = complex float64 (re, im interleaved)
    payload     row-major samples
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PRIMG\0"
VERSION = 1
KIND_REAL = 0
KIND_COMPLEX = 1


class PrimgFormatError(ValueError):
    pass


def encode(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        kind = KIND_COMPLEX
        payload = np.ascontiguousarray(arr, dtype="<c16").tobytes()
    else:
        kind = KIND_REAL
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape) + struct.pack("<B", kind)
    return header + payload


def decode(buf: bytes) -> np.ndarray:
    if buf[:6] != MAGIC:
        raise PrimgFormatError("bad magic")
    try:
        return _decode_body(buf)
    except struct.error as exc:
        raise PrimgFormatError(f"truncated header: {exc}") from exc


def _decode_body(buf: bytes) -> np.ndarray:
    version, d = struct.unpack_from("<II", buf, 6)
    if version != VERSION:
        raise PrimgFormatError(f"unsupported version {version}")
    off = 14
    dims = struct.unpack_from(f"<{d}I", buf, off)
    off += 4 * d
    (kind,) = struct.unpack_from("<B", buf, off)
    off += 1
    if kind == KIND_REAL:
        dtype = np.dtype("<f8")
    elif kind == KIND_COMPLEX:
        dtype = np.dtype("<c16")
    else:
        raise PrimgFormatError(f"unknown kind {kind}")
    count = int(np.prod(dims)) if d else 1
    if len(buf) - off != count * dtype.itemsize:
        raise PrimgFormatError("payload length does not match header")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(dims)
    return arr.astype(np.complex128 if kind == KIND_COMPLEX else np.float64)


def write(path, array: np.ndarray) -> None:
    Path(path).write_bytes(encode(array))


def read(path) -> np.ndarray:
    return decode(Path(path).read_bytes())


def write_mask(path, mask: np.ndarray) -> None:
    """Masks are stored as real rasters of 0.0 / 1.0."""
    write(path, np.asarray(mask, dtype=bool).astype(np.float64))


def read_mask(path) -> np.ndarray:
    arr = read(path)
    if np.iscomplexobj(arr):
        raise PrimgFormatError("mask file must be real")
    return arr > 0.5
