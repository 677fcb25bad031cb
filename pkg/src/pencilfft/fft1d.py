"""Serial radix-2 FFT over batches of lines, with reusable plans.

The kernel is an iterative decimation-in-time butterfly network.  Every
stage applies the same elementwise operations to all lines of a batch at
once, so the result for a given line never depends on how many lines sit
beside it in the buffer.  That property is what makes transform output
bit-identical across different rank counts.

No normalization is applied in either direction; the 3D driver applies
the single 1/(Nx*Ny*Nz) factor after a backward pass.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidSizeError
from .tensor import is_pow2

FORWARD = "forward"
BACKWARD = "backward"

_SIGNS = {FORWARD: -1.0, BACKWARD: 1.0}


def _check_direction(direction: str) -> float:
    try:
        return _SIGNS[direction]
    except KeyError:
        raise InvalidSizeError(
            f"direction must be {FORWARD!r} or {BACKWARD!r}, got {direction!r}"
        ) from None


def bit_reverse_permutation(n: int) -> np.ndarray:
    """Index permutation that bit-reverses log2(n)-bit positions."""
    if not is_pow2(n):
        raise InvalidSizeError(f"length {n} is not a power of two")
    bits = n.bit_length() - 1
    perm = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        perm[1 << b : 1 << (b + 1)] = perm[: 1 << b] + (n >> (b + 1))
    return perm


class Plan1D:
    """Precomputed butterfly tables for one transform length and direction."""

    __slots__ = ("n", "direction", "bitrev", "twiddles")

    def __init__(self, n: int, direction: str):
        sign = _check_direction(direction)
        if not is_pow2(n):
            raise InvalidSizeError(f"transform length {n} is not a power of two")
        self.n = n
        self.direction = direction
        self.bitrev = bit_reverse_permutation(n)
        self.twiddles = []
        half = 1
        while half < n:
            angles = sign * 2.0 * np.pi * np.arange(half) / (2 * half)
            w = np.exp(1j * angles)
            w.setflags(write=False)
            self.twiddles.append(w)
            half *= 2

    def __repr__(self):
        return f"Plan1D(n={self.n}, direction={self.direction!r})"


def plan_create(n: int, direction: str) -> Plan1D:
    return Plan1D(n, direction)


def fft_batch(plan: Plan1D, buffer: np.ndarray, num_lines: int) -> np.ndarray:
    """Transform num_lines contiguous lines of length plan.n in place.

    The buffer must be a C-contiguous complex128 array of exactly
    num_lines * plan.n elements; each line occupies a contiguous run.
    Returns the same buffer.
    """
    n = plan.n
    if buffer.dtype != np.complex128 or not buffer.flags["C_CONTIGUOUS"]:
        raise InvalidSizeError("fft_batch needs a C-contiguous complex128 buffer")
    if buffer.size != num_lines * n:
        raise InvalidSizeError(
            f"buffer has {buffer.size} elements, expected {num_lines} lines of {n}"
        )
    if num_lines == 0 or n == 1:
        return buffer
    a = buffer.reshape(num_lines, n)
    a[:] = a[:, plan.bitrev]
    for w in plan.twiddles:
        half = w.size
        m = 2 * half
        v = a.reshape(num_lines, n // m, m)
        lo = v[..., :half]
        hi = v[..., half:]
        t = hi * w
        diff = lo - t
        lo += t
        hi[:] = diff
    return buffer


def dft_oracle(line: np.ndarray, direction: str) -> np.ndarray:
    """Direct O(n^2) DFT by explicit matrix product; shares nothing with fft_batch."""
    sign = _check_direction(direction)
    x = np.asarray(line, dtype=np.complex128)
    if x.ndim != 1:
        raise InvalidSizeError("oracle expects a single 1D line")
    n = x.size
    k = np.arange(n)
    phase = sign * 2.0 * np.pi * np.outer(k, k) / n
    return np.exp(1j * phase) @ x
