"""Flat binary tensor container shared by inputs, checkpoints, and outputs.

Layout, byte for byte:

    offset 0   4 bytes   magic "TSR1"
    offset 4   1 byte    rank r (unsigned, must be >= 1)
    offset 5   4*r bytes little-endian uint32 dims
    then       4*prod(dims) bytes little-endian float32 payload, row-major

Writes are canonical: the same dims and values always produce identical
bytes, so golden-file comparison works across platforms.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, DataError, TruncatedError, ZeroRankError

MAGIC = b"TSR1"


def write_tensor(path, values: np.ndarray, dims=None) -> None:
    """Write `values` (reshaped to `dims` if given) as a container file."""
    arr = np.asarray(values)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if any(d <= 0 for d in dims):
            raise DataError(f"dims must be positive, got {dims}")
        if int(np.prod(dims)) != arr.size:
            raise DataError(
                f"dim/value mismatch: prod{dims} = {int(np.prod(dims))}, "
                f"got {arr.size} values"
            )
        arr = arr.reshape(dims)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 255:
        raise DataError("rank does not fit in one byte")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<B", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a container file back as a float32 array (inverse of write_tensor)."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 5 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    rank = blob[4]
    if rank == 0:
        raise ZeroRankError(f"{path}: rank 0 tensor")
    dim_end = 5 + 4 * rank
    if len(blob) < dim_end:
        raise TruncatedError(f"{path}: header truncated")
    dims = struct.unpack(f"<{rank}I", blob[5:dim_end])
    count = int(np.prod(dims, dtype=np.int64))
    if len(blob) < dim_end + 4 * count:
        raise TruncatedError(
            f"{path}: payload has {(len(blob) - dim_end) // 4} floats, "
            f"expected {count}"
        )
    flat = np.frombuffer(blob, dtype="<f4", count=count, offset=dim_end)
    return flat.reshape(dims).copy()
