"""Reader and writer for the FST binary tensor format.

Layout::

    b"FST1" | dtype:u8 | rank:u8 | rank x extent:u32le | payload (row-major, LE)

dtype 0 is float32, dtype 1 is a uint8 {0,1} mask.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"FST1"
DTYPE_REAL32 = 0
DTYPE_MASK = 1
_DTYPES = {DTYPE_REAL32: np.dtype("<f4"), DTYPE_MASK: np.dtype("u1")}


def encode(array):
    """Serialize an array to FST bytes.  Boolean arrays are written as masks."""
    arr = np.asarray(array)
    if arr.dtype == np.bool_ or arr.dtype == np.uint8:
        code = DTYPE_MASK
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask payload must contain only 0/1")
    else:
        code = DTYPE_REAL32
    if arr.ndim > 255:
        raise ValueError(f"rank {arr.ndim} exceeds 255")
    if any(d < 1 or d >= 2**32 for d in arr.shape):
        raise ValueError(f"extents {arr.shape} not representable")
    payload = np.ascontiguousarray(arr.astype(_DTYPES[code])).tobytes()
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + payload


def decode(buf):
    """Parse FST bytes.  Masks come back as bool arrays, reals as float32."""
    buf = bytes(buf)
    if len(buf) < 6:
        raise FormatError("truncated header", offset=len(buf))
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", offset=0)
    code, rank = buf[4], buf[5]
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}", offset=4)
    pos = 6
    end = pos + 4 * rank
    if len(buf) < end:
        raise FormatError("truncated extents", offset=len(buf))
    dims = struct.unpack(f"<{rank}I", buf[pos:end])
    for k, d in enumerate(dims):
        if d == 0:
            raise FormatError("zero extent", offset=pos + 4 * k)
    dtype = _DTYPES[code]
    nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) < end + nbytes:
        raise FormatError(
            f"truncated payload: expected {nbytes} bytes, got {len(buf) - end}",
            offset=len(buf))
    if len(buf) > end + nbytes:
        raise FormatError("trailing bytes after payload", offset=end + nbytes)
    arr = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize,
                        offset=end).reshape(dims)
    if code == DTYPE_MASK:
        bad = np.flatnonzero(arr.ravel() > 1)
        if bad.size:
            raise FormatError("mask value outside {0,1}", offset=end + int(bad[0]))
        return arr.astype(bool)
    return arr.astype(np.float32)


def save(path, array):
    Path(path).write_bytes(encode(array))


def load(path):
    path = Path(path)
    try:
        return decode(path.read_bytes())
    except FormatError as e:
        err = FormatError(f"{path}: {e}")
        err.offset = e.offset
        raise err from e
