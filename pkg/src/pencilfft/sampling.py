"""Deterministic seeded input generation.

The value at a global grid point is a pure function of (seed, point), so
every rank can fill its own block without communication and the global
field is identical for any rank count, grid shape, or transport.  The
generator is a counter-based splitmix64: real and imaginary parts of
global point g draw counters 2g and 2g+1.

All arithmetic stays in numpy uint64 arrays, which wrap modulo 2^64
silently; Python-int or numpy-scalar paths are avoided on purpose.
"""

from __future__ import annotations

import numpy as np

from .decomp import PencilDescriptor
from .tensor import ORDER_XYZ, Tensor3, TensorDims

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SCALE = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def _draw_unit(seed: int, counters: np.ndarray) -> np.ndarray:
    """Map uint64 counters to float64 values uniform in [-1, 1)."""
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (counters + np.uint64(1)) * _GAMMA
    bits = _mix64(state) >> np.uint64(11)
    return bits.astype(np.float64) * _SCALE * 2.0 - 1.0


def random_block(seed: int, dims: TensorDims, extents, offsets) -> np.ndarray:
    """Seeded complex128 values for one local block, flat in X-fastest order."""
    nx, ny = dims.nx, dims.ny
    gx = (np.arange(extents[0], dtype=np.uint64) + np.uint64(offsets[0]))
    gy = (np.arange(extents[1], dtype=np.uint64) + np.uint64(offsets[1]))
    gz = (np.arange(extents[2], dtype=np.uint64) + np.uint64(offsets[2]))
    # Global linear index with X fastest: g = x + nx*(y + ny*z).
    g = (
        gx[None, None, :]
        + np.uint64(nx) * (gy[None, :, None] + np.uint64(ny) * gz[:, None, None])
    ).ravel()
    two_g = g * np.uint64(2)
    out = np.empty(g.size, dtype=np.complex128)
    out.real = _draw_unit(seed, two_g)
    out.imag = _draw_unit(seed, two_g + np.uint64(1))
    return out


def random_tensor(seed: int, dims: TensorDims) -> Tensor3:
    """The full seeded field as one X-fastest tensor."""
    data = random_block(seed, dims, dims.as_tuple(), (0, 0, 0))
    return Tensor3(dims.as_tuple(), ORDER_XYZ, data)


def random_pencil_block(seed: int, desc: PencilDescriptor, rank: int) -> np.ndarray:
    """The seeded values landing on one rank's initial X-pencil block."""
    return random_block(seed, desc.dims, desc.block_extents, desc.block_offsets(rank))
