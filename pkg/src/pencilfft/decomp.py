"""Process grids and the slab / pencil / cell data-distribution math.

Ranks are numbered row-major over a (py, pz) grid: rank r sits at
row r // pz, column r % pz.  A row communicator groups the pz ranks of
one row (used for Y<->Z exchanges); a column communicator groups the py
ranks of one column (used for X<->Y exchanges).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GridError, OverDecompositionError
from .tensor import TensorDims, is_pow2

SCHEME_SLAB = "slab"
SCHEME_PENCIL = "pencil"
SCHEME_CELL = "cell"
SCHEMES = (SCHEME_SLAB, SCHEME_PENCIL, SCHEME_CELL)


@dataclass(frozen=True)
class ProcessGrid:
    """A py x pz grid of ranks; both factors are powers of two."""

    py: int
    pz: int

    def __post_init__(self):
        for name, p in (("py", self.py), ("pz", self.pz)):
            if not isinstance(p, int) or not is_pow2(p):
                raise GridError(f"{name}={p!r} is not a positive power of two")

    @property
    def p_total(self) -> int:
        return self.py * self.pz

    def rank_coords(self, rank: int) -> tuple[int, int]:
        """(row, col) of a rank; row indexes Y-splitting, col indexes Z-splitting."""
        if not 0 <= rank < self.p_total:
            raise GridError(f"rank {rank} outside grid of {self.p_total} ranks")
        return rank // self.pz, rank % self.pz

    def rank_at(self, row: int, col: int) -> int:
        if not (0 <= row < self.py and 0 <= col < self.pz):
            raise GridError(f"grid coords ({row}, {col}) outside {self.py}x{self.pz}")
        return row * self.pz + col

    def row_members(self, row: int) -> tuple[int, ...]:
        """Ranks sharing a row, ordered by column."""
        return tuple(self.rank_at(row, c) for c in range(self.pz))

    def col_members(self, col: int) -> tuple[int, ...]:
        """Ranks sharing a column, ordered by row."""
        return tuple(self.rank_at(r, col) for r in range(self.py))


def grid_factorize(p_total: int, py: int | None = None, pz: int | None = None) -> ProcessGrid:
    """Choose (py, pz) for p_total ranks, or validate an explicit override.

    The default split gives the larger factor to py: with p_total = 2^p,
    py = 2^ceil(p/2) and pz = 2^floor(p/2).
    """
    if not isinstance(p_total, int) or not is_pow2(p_total):
        raise GridError(f"rank count {p_total!r} is not a positive power of two")
    if py is None and pz is None:
        p = p_total.bit_length() - 1
        py = 1 << ((p + 1) // 2)
        pz = 1 << (p // 2)
    elif py is None:
        if pz <= 0 or p_total % pz:
            raise GridError(f"pz={pz} does not divide {p_total} ranks")
        py = p_total // pz
    elif pz is None:
        if py <= 0 or p_total % py:
            raise GridError(f"py={py} does not divide {p_total} ranks")
        pz = p_total // py
    grid = ProcessGrid(py, pz)
    if grid.p_total != p_total:
        raise GridError(f"grid {py}x{pz} has {grid.p_total} ranks, expected {p_total}")
    return grid


def max_ranks(dims: TensorDims, scheme: str) -> int:
    """Largest usable rank count for a decomposition scheme on these dims."""
    if scheme == SCHEME_SLAB:
        return dims.nz
    if scheme == SCHEME_PENCIL:
        return dims.ny * dims.nz
    if scheme == SCHEME_CELL:
        return dims.total
    raise GridError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class PencilDescriptor:
    """Pencil decomposition of dims over a process grid.

    Each rank owns an (nx, ny/py, nz/pz) block in the initial X-pencil
    layout; Y and Z are block-distributed over grid rows and columns.
    """

    dims: TensorDims
    grid: ProcessGrid

    def __post_init__(self):
        if self.grid.py > self.dims.ny:
            raise OverDecompositionError(
                f"py={self.grid.py} exceeds ny={self.dims.ny}"
            )
        if self.grid.pz > self.dims.nz:
            raise OverDecompositionError(
                f"pz={self.grid.pz} exceeds nz={self.dims.nz}"
            )

    @property
    def block_extents(self) -> tuple[int, int, int]:
        return (self.dims.nx, self.dims.ny // self.grid.py, self.dims.nz // self.grid.pz)

    def block_offsets(self, rank: int) -> tuple[int, int, int]:
        row, col = self.grid.rank_coords(rank)
        return (0, row * (self.dims.ny // self.grid.py), col * (self.dims.nz // self.grid.pz))


def pencil_extents(dims: TensorDims, grid: ProcessGrid, rank: int):
    """(extents, offsets) of a rank's initial X-pencil block."""
    desc = PencilDescriptor(dims, grid)
    return desc.block_extents, desc.block_offsets(rank)


@dataclass(frozen=True)
class SlabDescriptor:
    """Slab decomposition: whole XY planes, Z block-distributed over p ranks."""

    dims: TensorDims
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not is_pow2(self.p):
            raise GridError(f"rank count {self.p!r} is not a positive power of two")
        if self.p > self.dims.nz:
            raise OverDecompositionError(
                f"{self.p} ranks exceed P_max={self.dims.nz} for slab on "
                f"{self.dims.nx}x{self.dims.ny}x{self.dims.nz}"
            )

    @property
    def block_extents(self) -> tuple[int, int, int]:
        return (self.dims.nx, self.dims.ny, self.dims.nz // self.p)

    def block_offsets(self, rank: int) -> tuple[int, int, int]:
        if not 0 <= rank < self.p:
            raise GridError(f"rank {rank} outside {self.p} ranks")
        return (0, 0, rank * (self.dims.nz // self.p))


def slab_extents(dims: TensorDims, p: int, rank: int):
    """(extents, offsets) of a rank's slab block."""
    desc = SlabDescriptor(dims, p)
    return desc.block_extents, desc.block_offsets(rank)


def cell_extents(dims: TensorDims, pgrid: tuple[int, int, int], rank: int):
    """(extents, offsets) for a 3D cell decomposition over (px, py, pz) ranks.

    Provided for sizing only; the transform pipelines use slab and pencil.
    """
    px, py, pz = pgrid
    for name, p, n in (("px", px, dims.nx), ("py", py, dims.ny), ("pz", pz, dims.nz)):
        if not isinstance(p, int) or not is_pow2(p):
            raise GridError(f"{name}={p!r} is not a positive power of two")
        if p > n:
            raise OverDecompositionError(f"{name}={p} exceeds axis extent {n}")
    total = px * py * pz
    if not 0 <= rank < total:
        raise GridError(f"rank {rank} outside {total} ranks")
    ix = rank % px
    iy = (rank // px) % py
    iz = rank // (px * py)
    extents = (dims.nx // px, dims.ny // py, dims.nz // pz)
    offsets = (ix * extents[0], iy * extents[1], iz * extents[2])
    return extents, offsets


def descriptor_for(dims: TensorDims, scheme: str, grid: ProcessGrid) -> PencilDescriptor:
    """Pencil descriptor realizing a scheme; slab is the (1, p) pencil grid.

    Slab enforces its own tighter rank limit (p <= nz) before degrading
    to the equivalent one-row pencil layout.
    """
    if scheme == SCHEME_SLAB:
        if grid.py != 1:
            raise GridError(f"slab layout needs a 1x{grid.p_total} grid, got {grid.py}x{grid.pz}")
        SlabDescriptor(dims, grid.p_total)  # validates the slab rank limit
        return PencilDescriptor(dims, grid)
    if scheme == SCHEME_PENCIL:
        return PencilDescriptor(dims, grid)
    raise GridError(f"scheme {scheme!r} has no transform pipeline")
