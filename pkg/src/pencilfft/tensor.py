"""Dense 3D complex blocks stored in flat buffers, plus the index algebra on them.

A block is always a 1-D numpy array of complex128 together with its
(x, y, z) extents and an axis order naming which axis varies fastest in
memory.  All layout reasoning in the package reduces to the stride
arithmetic defined here, so it is kept deliberately small and heavily
tested.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError, InvalidSizeError, NonFiniteError

COMPLEX_DTYPE = np.dtype("<c16")  # interleaved (re, im) little-endian float64 pairs

AXIS_X, AXIS_Y, AXIS_Z = 0, 1, 2

# Axis orders list axes fastest-varying first.
ORDER_XYZ = (AXIS_X, AXIS_Y, AXIS_Z)
ORDER_YZX = (AXIS_Y, AXIS_Z, AXIS_X)
ORDER_ZXY = (AXIS_Z, AXIS_X, AXIS_Y)

FILE_MAGIC = b"CRFT"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TensorDims:
    """Global grid extents; each must be a power of two (they may differ)."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name, n in zip("xyz", self.as_tuple()):
            if not isinstance(n, int) or not is_pow2(n):
                raise InvalidSizeError(
                    f"n{name}={n!r} is not a positive power of two"
                )

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def total(self) -> int:
        return self.nx * self.ny * self.nz


def strides_for(extents, axis_order) -> tuple[int, int, int]:
    """Element strides indexed by canonical axis (x, y, z).

    axis_order[0] is the fastest-varying axis and gets stride 1; each
    later axis strides over the product of the extents before it.
    """
    if sorted(axis_order) != [0, 1, 2]:
        raise InvalidSizeError(f"axis order {axis_order!r} is not a permutation of (0, 1, 2)")
    strides = [0, 0, 0]
    strides[axis_order[0]] = 1
    strides[axis_order[1]] = extents[axis_order[0]]
    strides[axis_order[2]] = extents[axis_order[0]] * extents[axis_order[1]]
    return tuple(strides)


def linear_index(coords, extents, axis_order) -> int:
    """Flat offset of canonical coords (cx, cy, cz) in a block of the given order."""
    for c, e in zip(coords, extents):
        if not 0 <= c < e:
            raise IndexError(f"coords {coords!r} outside extents {tuple(extents)!r}")
    sx, sy, sz = strides_for(extents, axis_order)
    return coords[0] * sx + coords[1] * sy + coords[2] * sz


def coords_of(offset: int, extents, axis_order) -> tuple[int, int, int]:
    """Inverse of linear_index."""
    total = extents[0] * extents[1] * extents[2]
    if not 0 <= offset < total:
        raise IndexError(f"offset {offset} outside block of {total} elements")
    coords = [0, 0, 0]
    rem = offset
    for axis in axis_order:
        coords[axis] = rem % extents[axis]
        rem //= extents[axis]
    return tuple(coords)


def complex_mul(a, b):
    """Complex product from components: (ar*br - ai*bi, ar*bi + ai*br).

    Accepts scalars or broadcastable arrays.  Agrees with native
    complex128 multiplication to within rounding of the component
    formula (native code may contract the products differently).
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    re = a.real * b.real - a.imag * b.imag
    im = a.real * b.imag + a.imag * b.real
    out = np.empty(np.broadcast(a, b).shape, dtype=np.complex128)
    out.real = re
    out.imag = im
    return out[()]


def ensure_finite(data: np.ndarray, context: str) -> None:
    """Reject NaN/Inf; silent propagation of non-finite values is never allowed."""
    if not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite value in {context}")


class Tensor3:
    """A 3D complex block: flat complex128 buffer + extents + axis order."""

    __slots__ = ("extents", "axis_order", "data")

    def __init__(self, extents, axis_order, data: np.ndarray):
        extents = tuple(int(e) for e in extents)
        axis_order = tuple(axis_order)
        strides_for(extents, axis_order)  # validates the order
        for e in extents:
            if e < 1:
                raise InvalidSizeError(f"extent {e} is not positive")
        data = np.ascontiguousarray(data, dtype=np.complex128)
        if data.ndim != 1:
            raise InvalidSizeError("tensor buffer must be one-dimensional")
        if data.size != extents[0] * extents[1] * extents[2]:
            raise InvalidSizeError(
                f"buffer has {data.size} elements, extents {extents} need "
                f"{extents[0] * extents[1] * extents[2]}"
            )
        self.extents = extents
        self.axis_order = axis_order
        self.data = data

    @classmethod
    def zeros(cls, extents, axis_order=ORDER_XYZ) -> "Tensor3":
        n = extents[0] * extents[1] * extents[2]
        return cls(extents, axis_order, np.zeros(n, dtype=np.complex128))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tensor3":
        """Build an X-fastest tensor from a canonical array indexed [x, y, z]."""
        arr = np.asarray(arr, dtype=np.complex128)
        if arr.ndim != 3:
            raise InvalidSizeError("expected a 3D array")
        # Memory here is (z, y, x) slow-to-fast, i.e. X varies fastest.
        return cls(arr.shape, ORDER_XYZ, arr.transpose(2, 1, 0).ravel())

    def as_array3d(self) -> np.ndarray:
        """Canonical [x, y, z]-indexed view of the buffer (no copy)."""
        shape = tuple(self.extents[a] for a in reversed(self.axis_order))
        arr = self.data.reshape(shape)
        # Move axes so position 0 is x, 1 is y, 2 is z.
        src_axes = tuple(reversed(self.axis_order))
        perm = tuple(src_axes.index(a) for a in (AXIS_X, AXIS_Y, AXIS_Z))
        return arr.transpose(perm)

    def element(self, cx: int, cy: int, cz: int) -> complex:
        return complex(self.data[linear_index((cx, cy, cz), self.extents, self.axis_order)])

    def copy(self) -> "Tensor3":
        return Tensor3(self.extents, self.axis_order, self.data.copy())

    def __repr__(self):
        return f"Tensor3(extents={self.extents}, axis_order={self.axis_order})"


def reorder(tensor: Tensor3, axis_order) -> Tensor3:
    """Copy a tensor into a new memory order; values and placement unchanged."""
    axis_order = tuple(axis_order)
    if axis_order == tensor.axis_order:
        return tensor.copy()
    arr = tensor.as_array3d()
    flat = arr.transpose(tuple(reversed(axis_order))).ravel()
    return Tensor3(tensor.extents, axis_order, flat)


def write_tensor(path, tensor: Tensor3) -> None:
    """Serialize to the binary tensor format (X-fastest, little-endian)."""
    t = reorder(tensor, ORDER_XYZ) if tensor.axis_order != ORDER_XYZ else tensor
    nx, ny, nz = t.extents
    payload = np.ascontiguousarray(t.data, dtype=COMPLEX_DTYPE).tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FILE_MAGIC, FILE_VERSION, nx, ny, nz))
        fh.write(payload)


def read_tensor(path) -> Tensor3:
    """Read a tensor written by write_tensor; validates magic, version, length."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, version, nx, ny, nz = _HEADER.unpack(header)
        if magic != FILE_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if version != FILE_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        total = nx * ny * nz
        payload = fh.read()
    if len(payload) != total * COMPLEX_DTYPE.itemsize:
        raise FileFormatError(
            f"{path}: payload is {len(payload)} bytes, dims say "
            f"{total * COMPLEX_DTYPE.itemsize}"
        )
    data = np.frombuffer(payload, dtype=COMPLEX_DTYPE).astype(np.complex128)
    return Tensor3((nx, ny, nz), ORDER_XYZ, data)
