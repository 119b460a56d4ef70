"""
Reading and writing FST tensors
===============================

FST is a small binary container: the magic ``FST1``, a dtype byte (0 for
float32, 1 for uint8 masks), a rank byte, little-endian uint32 extents and
the raw payload.  Corrupt files are rejected with the byte offset of the
problem.
"""

import numpy as np

from fssk import FormatError, fst

x = np.arange(12, dtype=np.float32).reshape(3, 2, 2)
buf = fst.encode(x)
print("header:", buf[:4], "dtype", buf[4], "rank", buf[5])
print("round trip:", np.array_equal(fst.decode(buf), x))

mask = np.eye(3, dtype=bool)
print("mask payload:", list(fst.encode(mask)[-9:]))

bad = bytearray(buf)
bad[4] = 7
try:
    fst.decode(bytes(bad))
except FormatError as e:
    print("rejected:", e)
