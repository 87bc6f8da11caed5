"""Binary tensor container: bit-exact on-disk format for dense arrays.

Layout (little-endian):
    bytes 0-3   magic "WABT"
    bytes 4-7   version (uint32, currently 1)
    byte  8     dtype code (0 = float32, 1 = uint8)
    byte  9     ndim (1..4)
    next ndim*8 dims (uint64 each)
    rest        row-major payload

The format is deliberately tiny so any consumer language can parse it in a
few dozen lines; rewriting the same array always yields byte-identical files.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import (
    TensorFormatError,
    TensorLengthError,
    TensorValidationError,
    TensorVersionError,
)

MAGIC = b"WABT"
VERSION = 1

# explicit little-endian dtypes keep the format identical across hosts
DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.uint8): 1}
CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}

_MAX_NDIM = 4


def _validate(array: np.ndarray) -> None:
    if array.dtype not in DTYPE_CODES:
        raise TensorValidationError(
            "dtype_code", f"unsupported dtype {array.dtype}; use float32 or uint8"
        )
    if not 1 <= array.ndim <= _MAX_NDIM:
        raise TensorValidationError("ndim", f"must be in [1,{_MAX_NDIM}], got {array.ndim}")
    for d in array.shape:
        if d < 1:
            raise TensorValidationError("dims", f"every dim must be >= 1, got {array.shape}")


def write_tensor(array: np.ndarray, path: str | os.PathLike) -> None:
    """Write ``array`` to ``path`` in the container format.

    Raises TensorValidationError if the array violates a container
    invariant (dtype, ndim, dims). Writing is atomic per file: the caller
    owns the path.
    """
    array = np.asarray(array)
    _validate(array)
    array = np.ascontiguousarray(array)
    code = DTYPE_CODES[array.dtype]
    header = bytearray()
    header += MAGIC
    header += struct.pack("<I", VERSION)
    header += struct.pack("<B", code)
    header += struct.pack("<B", array.ndim)
    for d in array.shape:
        header += struct.pack("<Q", d)
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(array.astype(CODE_DTYPES[code], copy=False).tobytes(order="C"))


def read_tensor_header(path: str | os.PathLike) -> tuple[np.dtype, tuple[int, ...]]:
    """Read only the header of a tensor file; cheap shape/dtype probe."""
    with open(path, "rb") as fh:
        head = fh.read(10)
        if len(head) < 10 or head[:4] != MAGIC:
            raise TensorFormatError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", head[4:8])
        if version != VERSION:
            raise TensorVersionError(f"{path}: unsupported version {version}")
        dtype_code = head[8]
        if dtype_code not in CODE_DTYPES:
            raise TensorVersionError(f"{path}: unknown dtype code {dtype_code}")
        ndim = head[9]
        if not 1 <= ndim <= _MAX_NDIM:
            raise TensorFormatError(f"{path}: ndim {ndim} out of range")
        raw_dims = fh.read(8 * ndim)
        if len(raw_dims) < 8 * ndim:
            raise TensorLengthError(f"{path}: truncated header")
        dims = struct.unpack(f"<{ndim}Q", raw_dims)
        if any(d < 1 for d in dims):
            raise TensorFormatError(f"{path}: zero-sized dim in {dims}")
        return CODE_DTYPES[dtype_code], dims


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    """Read a tensor file back into an ndarray.

    Raises TensorFormatError on bad magic, TensorVersionError on unknown
    version/dtype code, TensorLengthError when the payload does not match
    the dims declared in the header.
    """
    dtype, dims = read_tensor_header(path)
    header_size = 10 + 8 * len(dims)
    count = int(np.prod(dims))
    expected = count * dtype.itemsize
    with open(path, "rb") as fh:
        fh.seek(header_size)
        payload = fh.read()
    if len(payload) != expected:
        raise TensorLengthError(
            f"{path}: header declares {expected} payload bytes, file has {len(payload)}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
