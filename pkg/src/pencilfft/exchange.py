"""Pack/unpack plans for the four global transposes.

Each transpose redistributes one axis over a communicator of m ranks:
a scatter axis (held fully by the source layout, split m ways in the
destination) and a gather axis (split in the source, full in the
destination).  The third axis rides along unchanged.

A plan splits the work into k chunks along the scatter axis: chunk c
covers a 1/k slice of every peer's scatter range, so each chunk is one
self-contained all_to_all over segments of equal size.  Chunking the
scatter axis means k must divide the per-peer scatter width (nx/py for
the XY exchange, and so on); any k that does not evenly divide is
rejected.

Plans are rank-independent: the segment a member packs for peer r and
the slot it fills from peer r depend only on r, so one plan serves every
member of the communicator.  Pack order within a segment follows the
destination's memory order, which is what lets unpack be a single
scatter of the received buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomp import PencilDescriptor
from .errors import InvalidChunkError, InvalidSizeError
from .tensor import AXIS_X, AXIS_Y, AXIS_Z, ORDER_XYZ, ORDER_YZX, ORDER_ZXY, strides_for

XY_FORWARD = "xy-forward"
YZ_FORWARD = "yz-forward"
YZ_RESTORE = "yz-restore"
XY_RESTORE = "xy-restore"

ROLE_ROW = "row"
ROLE_COLUMN = "column"

LAYOUT_X = "x-pencil"
LAYOUT_Y = "y-pencil"
LAYOUT_Z = "z-pencil"


def layout_geometry(layout: str, desc: PencilDescriptor, rank: int):
    """(extents, axis_order, global offsets) of one rank's block in a layout.

    The pipeline's three resting layouts each hold one axis in full and
    keep it fastest in memory:

      x-pencil: (nx, ny/py, nz/pz), X fastest, split by (row -> Y, col -> Z)
      y-pencil: (nx/py, ny, nz/pz), Y fastest, split by (row -> X, col -> Z)
      z-pencil: (nx/py, ny/pz, nz), Z fastest, split by (row -> X, col -> Y)
    """
    dims, grid = desc.dims, desc.grid
    row, col = grid.rank_coords(rank)
    if layout == LAYOUT_X:
        extents = (dims.nx, dims.ny // grid.py, dims.nz // grid.pz)
        return extents, ORDER_XYZ, (0, row * extents[1], col * extents[2])
    if layout == LAYOUT_Y:
        extents = (dims.nx // grid.py, dims.ny, dims.nz // grid.pz)
        return extents, ORDER_YZX, (row * extents[0], 0, col * extents[2])
    if layout == LAYOUT_Z:
        extents = (dims.nx // grid.py, dims.ny // grid.pz, dims.nz)
        return extents, ORDER_ZXY, (row * extents[0], col * extents[1], 0)
    raise InvalidSizeError(f"unknown layout {layout!r}")


@dataclass(frozen=True)
class ExchangePlan:
    """Precomputed gather/scatter index tables for one transpose at one k."""

    kind: str
    comm_role: str
    members: int
    k_chunks: int
    seg_elems: int  # elements per (chunk, peer) segment
    src_extents: tuple
    src_order: tuple
    dst_extents: tuple
    dst_order: tuple
    scatter_axis: int
    gather_axis: int
    pack_index: tuple  # k arrays of members * seg_elems source offsets
    unpack_index: tuple  # k arrays of members * seg_elems destination offsets

    @property
    def chunk_elems(self) -> int:
        return self.members * self.seg_elems

    @property
    def total_elems(self) -> int:
        e = self.src_extents
        return e[0] * e[1] * e[2]


def _axis_offsets(ranges, strides, enum_axes) -> np.ndarray:
    """Flat offsets of a coordinate box, nested slow-to-fast over enum_axes."""
    slow, mid, fast = enum_axes
    a = ranges[slow] * strides[slow]
    b = ranges[mid] * strides[mid]
    c = ranges[fast] * strides[fast]
    return (a[:, None, None] + b[None, :, None] + c[None, None, :]).ravel()


def _build_plan(kind, comm_role, m, k, src, dst, scatter_axis, gather_axis) -> ExchangePlan:
    src_extents, src_order = src
    dst_extents, dst_order = dst
    (third_axis,) = set((AXIS_X, AXIS_Y, AXIS_Z)) - {scatter_axis, gather_axis}
    w_s = dst_extents[scatter_axis]
    w_g = src_extents[gather_axis]
    assert src_extents[scatter_axis] == m * w_s
    assert dst_extents[gather_axis] == m * w_g
    assert src_extents[third_axis] == dst_extents[third_axis]
    if not isinstance(k, int) or k < 1:
        raise InvalidChunkError(f"chunk count k={k!r} must be a positive integer")
    if w_s % k:
        raise InvalidChunkError(
            f"{kind}: k={k} does not divide the per-peer scatter width {w_s}"
        )
    w_ck = w_s // k
    t_ext = src_extents[third_axis]
    src_strides = strides_for(src_extents, src_order)
    dst_strides = strides_for(dst_extents, dst_order)
    enum_axes = tuple(reversed(dst_order))
    t_range = np.arange(t_ext, dtype=np.int64)
    g_src = np.arange(w_g, dtype=np.int64)
    pack_index = []
    unpack_index = []
    for c in range(k):
        pack_parts = []
        unpack_parts = []
        for r in range(m):
            s_src = np.arange(r * w_s + c * w_ck, r * w_s + (c + 1) * w_ck, dtype=np.int64)
            s_dst = np.arange(c * w_ck, (c + 1) * w_ck, dtype=np.int64)
            g_dst = np.arange(r * w_g, (r + 1) * w_g, dtype=np.int64)
            src_ranges = {scatter_axis: s_src, gather_axis: g_src, third_axis: t_range}
            dst_ranges = {scatter_axis: s_dst, gather_axis: g_dst, third_axis: t_range}
            pack_parts.append(_axis_offsets(src_ranges, src_strides, enum_axes))
            unpack_parts.append(_axis_offsets(dst_ranges, dst_strides, enum_axes))
        pack_index.append(np.concatenate(pack_parts))
        unpack_index.append(np.concatenate(unpack_parts))
    return ExchangePlan(
        kind=kind,
        comm_role=comm_role,
        members=m,
        k_chunks=k,
        seg_elems=w_ck * w_g * t_ext,
        src_extents=tuple(src_extents),
        src_order=tuple(src_order),
        dst_extents=tuple(dst_extents),
        dst_order=tuple(dst_order),
        scatter_axis=scatter_axis,
        gather_axis=gather_axis,
        pack_index=tuple(pack_index),
        unpack_index=tuple(unpack_index),
    )


def _geometries(desc: PencilDescriptor):
    dims, grid = desc.dims, desc.grid
    x_pencil = ((dims.nx, dims.ny // grid.py, dims.nz // grid.pz), ORDER_XYZ)
    y_pencil = ((dims.nx // grid.py, dims.ny, dims.nz // grid.pz), ORDER_YZX)
    z_pencil = ((dims.nx // grid.py, dims.ny // grid.pz, dims.nz), ORDER_ZXY)
    return x_pencil, y_pencil, z_pencil


def plan_xy_forward(desc: PencilDescriptor, k: int) -> ExchangePlan:
    """X-pencil -> Y-pencil over a column communicator of py ranks."""
    x_pencil, y_pencil, _ = _geometries(desc)
    return _build_plan(XY_FORWARD, ROLE_COLUMN, desc.grid.py, k,
                       x_pencil, y_pencil, AXIS_X, AXIS_Y)


def plan_yz_forward(desc: PencilDescriptor, k: int) -> ExchangePlan:
    """Y-pencil -> Z-pencil over a row communicator of pz ranks."""
    _, y_pencil, z_pencil = _geometries(desc)
    return _build_plan(YZ_FORWARD, ROLE_ROW, desc.grid.pz, k,
                       y_pencil, z_pencil, AXIS_Y, AXIS_Z)


def plan_yz_restore(desc: PencilDescriptor, k: int) -> ExchangePlan:
    """Z-pencil -> Y-pencil over a row communicator of pz ranks."""
    _, y_pencil, z_pencil = _geometries(desc)
    return _build_plan(YZ_RESTORE, ROLE_ROW, desc.grid.pz, k,
                       z_pencil, y_pencil, AXIS_Z, AXIS_Y)


def plan_xy_restore(desc: PencilDescriptor, k: int) -> ExchangePlan:
    """Y-pencil -> X-pencil over a column communicator of py ranks."""
    x_pencil, y_pencil, _ = _geometries(desc)
    return _build_plan(XY_RESTORE, ROLE_COLUMN, desc.grid.py, k,
                       y_pencil, x_pencil, AXIS_Y, AXIS_X)


def pack_chunk(plan: ExchangePlan, source: np.ndarray, c: int) -> np.ndarray:
    """Gather chunk c of the send buffer; the source is never modified."""
    if not 0 <= c < plan.k_chunks:
        raise InvalidChunkError(f"chunk {c} outside 0..{plan.k_chunks - 1}")
    if source.size != plan.total_elems:
        raise InvalidSizeError(
            f"{plan.kind}: source has {source.size} elements, plan needs {plan.total_elems}"
        )
    return source[plan.pack_index[c]]


def unpack_chunk(plan: ExchangePlan, dest: np.ndarray, received: np.ndarray, c: int) -> np.ndarray:
    """Scatter a received chunk into the destination buffer; returns dest."""
    if not 0 <= c < plan.k_chunks:
        raise InvalidChunkError(f"chunk {c} outside 0..{plan.k_chunks - 1}")
    if dest.size != plan.total_elems:
        raise InvalidSizeError(
            f"{plan.kind}: destination has {dest.size} elements, plan needs {plan.total_elems}"
        )
    if received.size != plan.chunk_elems:
        raise InvalidSizeError(
            f"{plan.kind}: received chunk has {received.size} elements, "
            f"expected {plan.chunk_elems}"
        )
    dest[plan.unpack_index[c]] = received
    return dest
