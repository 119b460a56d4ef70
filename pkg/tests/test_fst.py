import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from fssk import FormatError, fst


@given(arrays(np.float32, array_shapes(min_dims=1, max_dims=4, max_side=5),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_real_roundtrip(a):
    out = fst.decode(fst.encode(a))
    assert out.dtype == np.float32
    assert out.tobytes() == a.tobytes()


@given(arrays(np.bool_, array_shapes(min_dims=2, max_dims=2, max_side=6)))
def test_mask_roundtrip(m):
    out = fst.decode(fst.encode(m))
    assert out.dtype == np.bool_
    np.testing.assert_array_equal(out, m)


def test_header_layout():
    buf = fst.encode(np.zeros((2, 3), dtype=np.float32))
    assert buf[:4] == b"FST1"
    assert buf[4] == 0 and buf[5] == 2
    assert struct.unpack("<2I", buf[6:14]) == (2, 3)
    assert len(buf) == 14 + 6 * 4
    assert fst.encode(np.ones((2, 2), dtype=bool))[4] == 1


def test_little_endian_payload():
    buf = fst.encode(np.array([1.0], dtype=np.float32))
    assert buf[-4:] == struct.pack("<f", 1.0)


def test_bad_magic():
    buf = bytearray(fst.encode(np.ones(3, np.float32)))
    buf[:4] = b"NOPE"
    with pytest.raises(FormatError) as e:
        fst.decode(bytes(buf))
    assert e.value.offset == 0


def test_bad_dtype():
    buf = bytearray(fst.encode(np.ones(3, np.float32)))
    buf[4] = 7
    with pytest.raises(FormatError) as e:
        fst.decode(bytes(buf))
    assert e.value.offset == 4


def test_truncated_payload_reports_offset():
    buf = fst.encode(np.ones((4, 4), np.float32))
    with pytest.raises(FormatError, match="byte offset") as e:
        fst.decode(buf[:-3])
    assert e.value.offset == len(buf) - 3


def test_truncated_extents():
    with pytest.raises(FormatError):
        fst.decode(b"FST1\x00\x03\x01\x00")


def test_mask_out_of_range():
    buf = bytearray(fst.encode(np.zeros((2, 2), dtype=bool)))
    buf[-1] = 5
    with pytest.raises(FormatError) as e:
        fst.decode(bytes(buf))
    assert e.value.offset == len(buf) - 1


def test_file_roundtrip(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(1, 2, 3)
    fst.save(tmp_path / "a.fst", a)
    np.testing.assert_array_equal(fst.load(tmp_path / "a.fst"), a)
    (tmp_path / "b.fst").write_bytes(b"FST")
    with pytest.raises(FormatError, match="b.fst"):
        fst.load(tmp_path / "b.fst")
