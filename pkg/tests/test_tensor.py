"""Index algebra, tensor containers, and the binary tensor file format."""

import struct

import numpy as np
import pytest

from pencilfft.errors import FileFormatError, InvalidSizeError, NonFiniteError
from pencilfft.tensor import (
    ORDER_XYZ,
    ORDER_YZX,
    ORDER_ZXY,
    Tensor3,
    TensorDims,
    complex_mul,
    coords_of,
    ensure_finite,
    is_pow2,
    linear_index,
    read_tensor,
    reorder,
    strides_for,
    write_tensor,
)

ALL_ORDERS = (ORDER_XYZ, ORDER_YZX, ORDER_ZXY)


def test_is_pow2():
    assert [n for n in range(1, 20) if is_pow2(n)] == [1, 2, 4, 8, 16]
    assert not is_pow2(0)
    assert not is_pow2(-4)


def test_tensor_dims_validation():
    d = TensorDims(4, 8, 2)
    assert d.as_tuple() == (4, 8, 2)
    assert d.total == 64
    for bad in ((3, 4, 4), (4, 0, 4), (4, 4, 12)):
        with pytest.raises(InvalidSizeError):
            TensorDims(*bad)


def test_linear_index_worked_example():
    # Pinned reference point: X-fastest strides (1, 2, 8) make
    # (0, 1, 2) -> 0*1 + 1*2 + 2*8 = 18.
    assert linear_index((0, 1, 2), (2, 4, 8), ORDER_XYZ) == 18


def test_strides_for_each_order():
    extents = (2, 4, 8)
    assert strides_for(extents, ORDER_XYZ) == (1, 2, 8)
    assert strides_for(extents, ORDER_YZX) == (32, 1, 4)
    assert strides_for(extents, ORDER_ZXY) == (8, 16, 1)
    with pytest.raises(InvalidSizeError):
        strides_for(extents, (0, 1, 1))


def test_index_roundtrip_is_a_bijection():
    extents = (2, 4, 8)
    total = 64
    for order in ALL_ORDERS:
        seen = set()
        for cx in range(extents[0]):
            for cy in range(extents[1]):
                for cz in range(extents[2]):
                    off = linear_index((cx, cy, cz), extents, order)
                    assert coords_of(off, extents, order) == (cx, cy, cz)
                    seen.add(off)
        assert seen == set(range(total))


def test_linear_index_bounds():
    with pytest.raises(IndexError):
        linear_index((2, 0, 0), (2, 4, 8), ORDER_XYZ)
    with pytest.raises(IndexError):
        coords_of(64, (2, 4, 8), ORDER_XYZ)


def test_complex_mul_worked_example():
    # (3+4i)(1+2i) = 3-8 + (6+4)i = -5+10i.
    assert complex_mul(3 + 4j, 1 + 2j) == -5 + 10j


def test_complex_mul_components_and_native_agreement():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        ours = complex_mul(a, b)
        # exact against the defining component formula
        assert np.array_equal(ours.real, a.real * b.real - a.imag * b.imag)
        assert np.array_equal(ours.imag, a.real * b.imag + a.imag * b.real)
        # and within rounding of the native product
        assert np.allclose(ours, a * b, rtol=1e-15, atol=1e-15)


def test_complex_mul_scalar_and_broadcast():
    out = complex_mul(np.array([1 + 1j, 2 - 1j]), 2j)
    assert out.dtype == np.complex128
    assert np.allclose(out, [(1 + 1j) * 2j, (2 - 1j) * 2j])
    assert isinstance(complex_mul(1 + 1j, 1 - 1j), np.complex128)


def test_tensor3_validation():
    with pytest.raises(InvalidSizeError):
        Tensor3((2, 2, 2), ORDER_XYZ, np.zeros(7, dtype=np.complex128))
    with pytest.raises(InvalidSizeError):
        Tensor3((2, 2, 2), ORDER_XYZ, np.zeros((2, 4), dtype=np.complex128))
    with pytest.raises(InvalidSizeError):
        Tensor3((2, 0, 2), ORDER_XYZ, np.zeros(0, dtype=np.complex128))


def test_tensor3_array_roundtrip():
    rng = np.random.default_rng(5)
    arr = rng.standard_normal((2, 4, 8)) + 1j * rng.standard_normal((2, 4, 8))
    t = Tensor3.from_array(arr)
    assert t.extents == (2, 4, 8)
    assert np.array_equal(t.as_array3d(), arr)
    # X-fastest flat layout: consecutive elements walk x at fixed (y, z).
    assert t.data[0] == arr[0, 0, 0]
    assert t.data[1] == arr[1, 0, 0]
    assert t.data[2] == arr[0, 1, 0]
    assert t.element(1, 2, 3) == arr[1, 2, 3]


def test_reorder_preserves_placement():
    rng = np.random.default_rng(9)
    arr = rng.standard_normal((4, 2, 8)) + 1j * rng.standard_normal((4, 2, 8))
    t = Tensor3.from_array(arr)
    for order in ALL_ORDERS:
        r = reorder(t, order)
        assert r.axis_order == order
        assert np.array_equal(r.as_array3d(), arr)
        # the fastest axis of the new order really is adjacent in memory
        step = [0, 0, 0]
        step[order[0]] = 1
        assert linear_index(tuple(step), r.extents, order) == 1


def test_ensure_finite():
    good = np.ones(4, dtype=np.complex128)
    ensure_finite(good, "test")
    for bad_value in (np.nan, np.inf, -np.inf, complex(0, np.nan)):
        bad = good.copy()
        bad[2] = bad_value
        with pytest.raises(NonFiniteError):
            ensure_finite(bad, "test")


def test_file_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(21)
    data = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    t = Tensor3((4, 4, 4), ORDER_XYZ, data)
    path = tmp_path / "t.bin"
    write_tensor(path, t)
    back = read_tensor(path)
    assert back.extents == (4, 4, 4)
    assert back.axis_order == ORDER_XYZ
    assert np.array_equal(back.data.view(np.uint64), t.data.view(np.uint64))


def test_file_header_layout(tmp_path):
    t = Tensor3.zeros((2, 4, 8))
    path = tmp_path / "t.bin"
    write_tensor(path, t)
    raw = path.read_bytes()
    magic, version, nx, ny, nz = struct.unpack("<4sIQQQ", raw[:32])
    assert magic == b"CRFT"
    assert version == 1
    assert (nx, ny, nz) == (2, 4, 8)
    assert len(raw) == 32 + 64 * 16


def test_file_written_x_fastest_regardless_of_memory_order(tmp_path):
    rng = np.random.default_rng(33)
    arr = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
    t = Tensor3.from_array(arr)
    pa = tmp_path / "a.bin"
    pb = tmp_path / "b.bin"
    write_tensor(pa, t)
    write_tensor(pb, reorder(t, ORDER_ZXY))
    assert pa.read_bytes() == pb.read_bytes()


def test_file_format_errors(tmp_path):
    t = Tensor3.zeros((2, 2, 2))
    path = tmp_path / "t.bin"
    write_tensor(path, t)
    raw = bytearray(path.read_bytes())

    bad_magic = tmp_path / "m.bin"
    bad_magic.write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(FileFormatError):
        read_tensor(bad_magic)

    bad_version = tmp_path / "v.bin"
    bad_version.write_bytes(bytes(raw[:4]) + struct.pack("<I", 9) + bytes(raw[8:]))
    with pytest.raises(FileFormatError):
        read_tensor(bad_version)

    truncated = tmp_path / "s.bin"
    truncated.write_bytes(bytes(raw[:-8]))
    with pytest.raises(FileFormatError):
        read_tensor(truncated)

    short_header = tmp_path / "h.bin"
    short_header.write_bytes(bytes(raw[:10]))
    with pytest.raises(FileFormatError):
        read_tensor(short_header)
