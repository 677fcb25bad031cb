"""Seeded input generation: determinism, layout independence, reference values."""

import numpy as np

from pencilfft.decomp import PencilDescriptor, ProcessGrid
from pencilfft.sampling import random_block, random_pencil_block, random_tensor
from pencilfft.tensor import TensorDims

from conftest import bits_equal


def _splitmix64_reference(seed: int, counter: int) -> float:
    """Independent scalar splitmix64 in plain Python ints, mapped to [-1, 1)."""
    mask = (1 << 64) - 1
    z = (seed + (counter + 1) * 0x9E3779B97F4A7C15) & mask
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & mask
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & mask
    z = z ^ (z >> 31)
    return (z >> 11) * 2.0 ** -53 * 2.0 - 1.0


def test_matches_scalar_reference():
    dims = TensorDims(4, 4, 2)
    t = random_tensor(42, dims)
    arr = t.as_array3d()
    for (x, y, z) in ((0, 0, 0), (3, 0, 0), (1, 2, 1), (3, 3, 1)):
        g = x + dims.nx * (y + dims.ny * z)
        assert arr[x, y, z].real == _splitmix64_reference(42, 2 * g)
        assert arr[x, y, z].imag == _splitmix64_reference(42, 2 * g + 1)


def test_deterministic_and_seed_sensitive():
    dims = TensorDims(8, 8, 8)
    a = random_tensor(7, dims)
    b = random_tensor(7, dims)
    c = random_tensor(8, dims)
    assert bits_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_values_fill_the_unit_square():
    t = random_tensor(1, TensorDims(16, 16, 16))
    for part in (t.data.real, t.data.imag):
        assert np.all(part >= -1.0)
        assert np.all(part < 1.0)
        assert np.std(part) > 0.4  # roughly uniform, not degenerate
    assert not np.array_equal(t.data.real, t.data.imag)


def test_blocks_are_slices_of_the_global_field():
    # The field must be a pure function of (seed, global point): every rank
    # of every grid sees exactly the global tensor restricted to its block.
    dims = TensorDims(8, 8, 8)
    full = random_tensor(42, dims).as_array3d()
    for grid in (ProcessGrid(1, 1), ProcessGrid(2, 2), ProcessGrid(4, 2), ProcessGrid(1, 8)):
        desc = PencilDescriptor(dims, grid)
        for rank in range(grid.p_total):
            block = random_pencil_block(42, desc, rank)
            ex = desc.block_extents
            off = desc.block_offsets(rank)
            expected = full[
                off[0] : off[0] + ex[0],
                off[1] : off[1] + ex[1],
                off[2] : off[2] + ex[2],
            ]
            got = np.swapaxes(block.reshape(ex[2], ex[1], ex[0]), 0, 2)
            assert bits_equal(np.ascontiguousarray(got), np.ascontiguousarray(expected))


def test_block_interface_offsets():
    dims = TensorDims(4, 4, 4)
    whole = random_block(42, dims, (4, 4, 4), (0, 0, 0))
    quarter = random_block(42, dims, (4, 2, 2), (0, 2, 2))
    full3d = np.swapaxes(whole.reshape(4, 4, 4), 0, 2)
    got3d = np.swapaxes(quarter.reshape(2, 2, 4), 0, 2)
    assert np.array_equal(got3d, full3d[:, 2:4, 2:4])
