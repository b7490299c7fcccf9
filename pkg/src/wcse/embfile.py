"""Binary embedding files: magic "WEMB", little-endian float32 payload.

Layout (all little-endian):

    bytes 0-3   magic b"WEMB"
    u32         format version (1)
    u32         row count N
    u32         column count d
    u32         element type code (0 = float32)
    N*d*4 bytes payload, row-major float32

Values are widened to float64 on load; every entry must be finite.
"""

import struct

import numpy as np

from .errors import FileFormatError

MAGIC = b"WEMB"
VERSION = 1
ELEM_F32 = 0

_HEADER = struct.Struct("<4sIIII")


def embeddings_to_bytes(matrix) -> bytes:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise FileFormatError(f"embedding payload must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FileFormatError("embedding payload contains non-finite values")
    header = _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], ELEM_F32)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def embeddings_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FileFormatError("embedding file too short for header")
    magic, version, rows, cols, elem = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FileFormatError(f"unsupported embedding file version {version}")
    if elem != ELEM_F32:
        raise FileFormatError(f"unsupported element type code {elem}")
    expected = rows * cols * 4
    payload = data[_HEADER.size :]
    if len(payload) != expected:
        raise FileFormatError(
            f"payload is {len(payload)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise FileFormatError("embedding file contains non-finite values")
    return arr


def write_embeddings(path, matrix) -> None:
    data = embeddings_to_bytes(matrix)
    with open(path, "wb") as fh:
        fh.write(data)


def read_embeddings(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FileFormatError(f"cannot read embedding file {path}: {exc}") from exc
    return embeddings_from_bytes(data)
