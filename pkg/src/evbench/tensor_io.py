"""Toolkit tensor container (.evbt).

Layout, little-endian throughout:

    offset  size        field
    0       8           magic b"EVB1TENS"
    8       1           dtype code (0 = f32, 1 = f64)
    9       1           rank
    10      8 * rank    dims, u64 each
    ...     prod(dims)  payload, row-major

Depth maps are stored as HxW f32 tensors with 0 meaning invalid.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EVB1TENS"

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class TensorFormatError(ValueError):
    """Malformed .evbt payload (bad magic, dtype, rank or length)."""


def read_tensor_bytes(data: bytes) -> np.ndarray:
    if len(data) < 10:
        raise TensorFormatError(f"file too short ({len(data)} bytes) for the tensor header")
    if data[:8] != MAGIC:
        raise TensorFormatError(f"magic mismatch: {data[:8]!r}")
    code, rank = data[8], data[9]
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    header_end = 10 + 8 * rank
    if len(data) < header_end:
        raise TensorFormatError(f"truncated dims: need {header_end} bytes, have {len(data)}")
    dims = struct.unpack_from(f"<{rank}Q", data, 10) if rank else ()
    dtype = _DTYPE_CODES[code]
    n = 1
    for d in dims:
        n *= d
    expected = header_end + n * dtype.itemsize
    if len(data) != expected:
        raise TensorFormatError(
            f"payload length mismatch: shape {tuple(dims)} needs {expected} bytes, have {len(data)}"
        )
    arr = np.frombuffer(data, dtype=dtype, count=n, offset=header_end)
    return arr.reshape(dims).copy()


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an .evbt file into a numpy array (f32 or f64)."""
    return read_tensor_bytes(Path(path).read_bytes())


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _CODE_FOR_DTYPE:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    code = _CODE_FOR_DTYPE[arr.dtype]
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    return header + np.ascontiguousarray(le).tobytes()


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    """Write a float32/float64 array as an .evbt file."""
    Path(path).write_bytes(tensor_to_bytes(arr))
