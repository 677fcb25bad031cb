"""The distributed 3D transform: stage schedule, strategies, overlap engine.

A forward transform walks each rank through three 1D FFT sweeps joined
by global transposes, then (by default) two more transposes that restore
the initial X-pencil placement:

  FFT(X) -> XY exchange -> FFT(Y) -> YZ exchange -> FFT(Z)
         -> YZ restore -> XY restore

The backward transform mirrors the sequence and applies the single
1/(nx*ny*nz) factor at the end.  XY-type exchanges run over column
communicators, YZ-type over row communicators.

Every exchange is issued chunk by chunk.  With overlap enabled, each
rank runs exactly two workers: its own thread does pack/unpack and FFTs
while a dedicated communication thread drives all_to_all, so packing
chunk c proceeds while chunk c-1 is in flight.  Chunking and overlap
are pure scheduling: every option produces bit-identical output.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

from .decomp import PencilDescriptor, ProcessGrid
from .errors import ConfigError, InvalidChunkError, LayoutError, TransportError
from .exchange import (
    LAYOUT_X,
    LAYOUT_Y,
    LAYOUT_Z,
    XY_FORWARD,
    XY_RESTORE,
    YZ_FORWARD,
    YZ_RESTORE,
    ExchangePlan,
    layout_geometry,
    pack_chunk,
    plan_xy_forward,
    plan_xy_restore,
    plan_yz_forward,
    plan_yz_restore,
    unpack_chunk,
)
from .fft1d import BACKWARD, FORWARD, Plan1D, fft_batch
from .sampling import random_pencil_block
from .tensor import Tensor3, TensorDims, ensure_finite, reorder

_OPTION_TABLE = {
    1: (False, False),
    2: (False, True),
    3: (True, False),
    4: (True, True),
}


@dataclass(frozen=True)
class StrategyConfig:
    """Execution strategy: overlap on/off, plan reuse on/off, chunk count k."""

    overlap: bool
    reuse_plan: bool
    k: int = 2

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"chunk count k={self.k!r} must be a positive integer")

    @classmethod
    def from_option(cls, option: int, k: int = 2) -> "StrategyConfig":
        """Numbered strategies: 1 = no overlap + per-call plans, 2 = no overlap
        + reused plans, 3 = overlap + per-call plans, 4 = overlap + reused plans."""
        try:
            overlap, reuse = _OPTION_TABLE[option]
        except KeyError:
            raise ConfigError(f"option must be one of 1..4, got {option!r}") from None
        return cls(overlap=overlap, reuse_plan=reuse, k=k)

    @property
    def option(self) -> int:
        for opt, pair in _OPTION_TABLE.items():
            if pair == (self.overlap, self.reuse_plan):
                return opt
        raise AssertionError("unreachable")


class DistributedTensor:
    """One rank's block of a globally distributed tensor, tagged with its layout."""

    __slots__ = ("desc", "rank", "layout", "tensor")

    def __init__(self, desc: PencilDescriptor, rank: int, layout: str, tensor: Tensor3):
        extents, order, _ = layout_geometry(layout, desc, rank)
        if tensor.extents != extents or tensor.axis_order != order:
            raise LayoutError(
                f"rank {rank}: block {tensor.extents}/{tensor.axis_order} does not "
                f"match {layout} geometry {extents}/{order}"
            )
        self.desc = desc
        self.rank = rank
        self.layout = layout
        self.tensor = tensor

    @classmethod
    def from_global(cls, global_tensor: Tensor3, desc: PencilDescriptor, rank: int):
        """Carve this rank's initial X-pencil block out of a full X-order tensor."""
        if global_tensor.extents != desc.dims.as_tuple():
            raise LayoutError(
                f"global tensor extents {global_tensor.extents} do not match "
                f"dims {desc.dims.as_tuple()}"
            )
        extents, _, offs = layout_geometry(LAYOUT_X, desc, rank)
        view = global_tensor.as_array3d()[
            offs[0] : offs[0] + extents[0],
            offs[1] : offs[1] + extents[1],
            offs[2] : offs[2] + extents[2],
        ]
        return cls(desc, rank, LAYOUT_X, Tensor3.from_array(view))

    @classmethod
    def seeded(cls, seed: int, desc: PencilDescriptor, rank: int):
        """This rank's X-pencil block of the seeded global field."""
        extents, order, _ = layout_geometry(LAYOUT_X, desc, rank)
        data = random_pencil_block(seed, desc, rank)
        return cls(desc, rank, LAYOUT_X, Tensor3(extents, order, data))


def gather_global(dist: DistributedTensor, world) -> Tensor3 | None:
    """Collect all blocks onto world member 0 as one X-order tensor."""
    blocks = world.gather(dist.tensor.data)
    if blocks is None:
        return None
    dims = dist.desc.dims
    arr = np.empty(dims.as_tuple(), dtype=np.complex128)
    for rank, flat in enumerate(blocks):
        extents, order, offs = layout_geometry(dist.layout, dist.desc, rank)
        block = Tensor3(extents, order, flat).as_array3d()
        arr[
            offs[0] : offs[0] + extents[0],
            offs[1] : offs[1] + extents[1],
            offs[2] : offs[2] + extents[2],
        ] = block
    return Tensor3.from_array(arr)


COMM_WORLD_ID = 0


def grid_communicators(ctx, grid: ProcessGrid):
    """(world, row, column) endpoints for this rank's place in the grid.

    Communicator ids are deterministic so independent processes agree:
    world is 0, column c is 1 + c, row r is 1 + pz + r.
    """
    world = ctx.world()
    row, col = grid.rank_coords(ctx.rank)
    col_comm = ctx.subcomm(grid.col_members(col), key=1 + col)
    row_comm = ctx.subcomm(grid.row_members(row), key=1 + grid.pz + row)
    return world, row_comm, col_comm


class _Pending:
    """Handle for one exchange running on the communication worker."""

    __slots__ = ("started", "done", "result", "error", "t_start", "t_end")

    def __init__(self):
        self.started = threading.Event()
        self.done = threading.Event()
        self.result = None
        self.error = None
        self.t_start = 0.0
        self.t_end = 0.0

    def wait(self):
        self.done.wait()
        if self.error is not None:
            raise self.error
        return self.result


class _CommWorker:
    """The dedicated communication thread of one rank.

    submit() returns only after the worker has picked the task up and
    stamped its start time, so the caller knows the exchange is in
    flight before it goes on to pack the next chunk.
    """

    def __init__(self):
        self._tasks: queue.SimpleQueue = queue.SimpleQueue()
        self._thread = threading.Thread(target=self._loop, daemon=True, name="comm-worker")
        self._thread.start()

    def submit(self, fn) -> _Pending:
        pending = _Pending()
        self._tasks.put((fn, pending))
        pending.started.wait()
        return pending

    def _loop(self):
        while True:
            item = self._tasks.get()
            if item is None:
                return
            fn, pending = item
            pending.t_start = time.perf_counter()
            pending.started.set()
            try:
                pending.result = fn()
            except BaseException as exc:  # noqa: BLE001 - delivered via wait()
                pending.error = exc
            pending.t_end = time.perf_counter()
            pending.done.set()

    def close(self):
        self._tasks.put(None)
        self._thread.join()


class ParallelFFT3D:
    """Per-rank transform handle binding geometry, strategy, and communicators."""

    def __init__(self, desc: PencilDescriptor, rank: int, strategy: StrategyConfig,
                 world, row_comm, col_comm, restore: bool = True, trace: list | None = None):
        grid = desc.grid
        if row_comm.size != grid.pz:
            raise ConfigError(f"row communicator has {row_comm.size} members, grid needs {grid.pz}")
        if col_comm.size != grid.py:
            raise ConfigError(f"column communicator has {col_comm.size} members, grid needs {grid.py}")
        self.desc = desc
        self.rank = rank
        self.strategy = strategy
        self.world = world
        self.row_comm = row_comm
        self.col_comm = col_comm
        self.restore = restore
        self.trace = trace
        self._exchange_plans: dict = {}
        self._fft_plans: dict = {}

    # -- plan management ------------------------------------------------

    _PLAN_BUILDERS = {
        XY_FORWARD: plan_xy_forward,
        YZ_FORWARD: plan_yz_forward,
        YZ_RESTORE: plan_yz_restore,
        XY_RESTORE: plan_xy_restore,
    }

    def _exchange_plan(self, kind: str) -> ExchangePlan:
        if not self.strategy.reuse_plan:
            return self._PLAN_BUILDERS[kind](self.desc, self.strategy.k)
        plan = self._exchange_plans.get(kind)
        if plan is None:
            plan = self._PLAN_BUILDERS[kind](self.desc, self.strategy.k)
            self._exchange_plans[kind] = plan
        return plan

    def _fft_plan(self, n: int, direction: str) -> Plan1D:
        if not self.strategy.reuse_plan:
            return Plan1D(n, direction)
        plan = self._fft_plans.get((n, direction))
        if plan is None:
            plan = Plan1D(n, direction)
            self._fft_plans[(n, direction)] = plan
        return plan

    # -- tracing --------------------------------------------------------

    def _record(self, phase: str, stage: str, chunk: int, t0: float, t1: float):
        if self.trace is not None:
            self.trace.append(
                {"phase": phase, "stage": stage, "chunk": chunk, "t0": t0, "t1": t1}
            )

    # -- stage execution ------------------------------------------------

    def _comm_for(self, plan: ExchangePlan):
        return self.row_comm if plan.comm_role == "row" else self.col_comm

    def _exchange_stage(self, kind: str, src: np.ndarray, worker) -> np.ndarray:
        plan = self._exchange_plan(kind)
        comm = self._comm_for(plan)
        dst = np.empty(plan.total_elems, dtype=np.complex128)
        k = plan.k_chunks

        def packed(c):
            t0 = time.perf_counter()
            send = pack_chunk(plan, src, c)
            self._record("pack", kind, c, t0, time.perf_counter())
            return send

        def unpack(c, received):
            t0 = time.perf_counter()
            unpack_chunk(plan, dst, received, c)
            self._record("unpack", kind, c, t0, time.perf_counter())

        def exchange_task(send):
            return lambda: comm.all_to_all(send)

        def rewrap(exc, c):
            return type(exc)(f"{kind} chunk {c} on the {plan.comm_role} communicator: {exc}")

        if worker is None:
            for c in range(k):
                send = packed(c)
                t0 = time.perf_counter()
                try:
                    received = comm.all_to_all(send)
                except TransportError as exc:
                    raise rewrap(exc, c) from exc
                self._record("exchange", kind, c, t0, time.perf_counter())
                unpack(c, received)
            return dst

        def finish(pending, c):
            try:
                received = pending.wait()
            except TransportError as exc:
                raise rewrap(exc, c) from exc
            self._record("exchange", kind, c, pending.t_start, pending.t_end)
            return received

        pending = worker.submit(exchange_task(packed(0)))
        for c in range(1, k):
            send = packed(c)
            received = finish(pending, c - 1)
            pending = worker.submit(exchange_task(send))
            unpack(c - 1, received)
        unpack(k - 1, finish(pending, k - 1))
        return dst

    def _fft_sweep(self, buf: np.ndarray, n: int, direction: str) -> np.ndarray:
        return fft_batch(self._fft_plan(n, direction), buf, buf.size // n)

    # -- public transform surface --------------------------------------

    def forward(self, dist: DistributedTensor) -> DistributedTensor:
        return self._run(dist, FORWARD)

    def backward(self, dist: DistributedTensor) -> DistributedTensor:
        return self._run(dist, BACKWARD)

    def stats(self):
        """Merged transform-communication counters (row + column endpoints)."""
        return self.row_comm.stats.merged_with(self.col_comm.stats)

    def _check_input(self, dist: DistributedTensor, expected_layout: str):
        if dist.desc.dims != self.desc.dims or dist.desc.grid != self.desc.grid:
            raise LayoutError("input tensor was decomposed for a different transform")
        if dist.rank != self.rank:
            raise LayoutError(f"input block belongs to rank {dist.rank}, handle is rank {self.rank}")
        if dist.layout != expected_layout:
            raise LayoutError(
                f"transform expects {expected_layout} input, got {dist.layout}"
            )

    def _run(self, dist: DistributedTensor, direction: str) -> DistributedTensor:
        dims = self.desc.dims
        spectrum_layout = LAYOUT_X if self.restore else LAYOUT_Z
        expected = LAYOUT_X if direction == FORWARD else spectrum_layout
        self._check_input(dist, expected)
        ensure_finite(dist.tensor.data, f"{direction} transform input")
        buf = dist.tensor.data.copy()
        worker = _CommWorker() if self.strategy.overlap else None
        try:
            if direction == FORWARD:
                buf = self._fft_sweep(buf, dims.nx, FORWARD)
                buf = self._exchange_stage(XY_FORWARD, buf, worker)
                buf = self._fft_sweep(buf, dims.ny, FORWARD)
                buf = self._exchange_stage(YZ_FORWARD, buf, worker)
                buf = self._fft_sweep(buf, dims.nz, FORWARD)
                if self.restore:
                    buf = self._exchange_stage(YZ_RESTORE, buf, worker)
                    buf = self._exchange_stage(XY_RESTORE, buf, worker)
                out_layout = spectrum_layout
            else:
                if self.restore:
                    buf = self._exchange_stage(XY_FORWARD, buf, worker)
                    buf = self._exchange_stage(YZ_FORWARD, buf, worker)
                buf = self._fft_sweep(buf, dims.nz, BACKWARD)
                buf = self._exchange_stage(YZ_RESTORE, buf, worker)
                buf = self._fft_sweep(buf, dims.ny, BACKWARD)
                buf = self._exchange_stage(XY_RESTORE, buf, worker)
                buf = self._fft_sweep(buf, dims.nx, BACKWARD)
                buf *= 1.0 / dims.total
                out_layout = LAYOUT_X
        finally:
            if worker is not None:
                worker.close()
        ensure_finite(buf, f"{direction} transform output")
        extents, order, _ = layout_geometry(out_layout, self.desc, self.rank)
        return DistributedTensor(self.desc, self.rank, out_layout,
                                 Tensor3(extents, order, buf))


def create(dims: TensorDims, grid: ProcessGrid, strategy: StrategyConfig, ctx,
           restore: bool = True, wrap_comms=None, trace: list | None = None) -> ParallelFFT3D:
    """Build a transform handle for this rank, wiring grid communicators.

    wrap_comms, if given, is called as wrap_comms(role, comm) with role
    "row" or "column" and may return a decorated communicator; used to
    inject delays or extra instrumentation around the transform's
    exchanges.
    """
    desc = PencilDescriptor(dims, grid)
    world, row_comm, col_comm = grid_communicators(ctx, grid)
    if wrap_comms is not None:
        row_comm = wrap_comms("row", row_comm)
        col_comm = wrap_comms("column", col_comm)
    return ParallelFFT3D(desc, ctx.rank, strategy, world, row_comm, col_comm,
                         restore=restore, trace=trace)


def forward(handle: ParallelFFT3D, dist: DistributedTensor) -> DistributedTensor:
    return handle.forward(dist)


def backward(handle: ParallelFFT3D, dist: DistributedTensor) -> DistributedTensor:
    return handle.backward(dist)


def stats(handle: ParallelFFT3D):
    return handle.stats()


def validate_strategy(desc: PencilDescriptor, strategy: StrategyConfig,
                      restore: bool = True) -> None:
    """Raise InvalidChunkError if k does not divide every exchanged axis width."""
    plan_xy_forward(desc, strategy.k)
    plan_yz_forward(desc, strategy.k)
    if restore:
        plan_yz_restore(desc, strategy.k)
        plan_xy_restore(desc, strategy.k)


_SERIAL_GRID = ProcessGrid(1, 1)


def serial_3dfft(tensor: Tensor3, direction: str) -> Tensor3:
    """Single-rank reference path: same kernels, local reorders, no transport."""
    from .tensor import ORDER_XYZ, ORDER_YZX, ORDER_ZXY

    if tensor.axis_order != ORDER_XYZ:
        raise LayoutError("serial transform expects an X-fastest tensor")
    dims = TensorDims(*tensor.extents)
    ensure_finite(tensor.data, f"{direction} transform input")
    extents = tensor.extents

    def moved(flat, from_order, to_order):
        return reorder(Tensor3(extents, from_order, flat), to_order).data

    def sweep(flat, n, d):
        return fft_batch(Plan1D(n, d), flat, flat.size // n)

    buf = tensor.data.copy()
    if direction == FORWARD:
        buf = sweep(buf, dims.nx, FORWARD)
        buf = moved(buf, ORDER_XYZ, ORDER_YZX)
        buf = sweep(buf, dims.ny, FORWARD)
        buf = moved(buf, ORDER_YZX, ORDER_ZXY)
        buf = sweep(buf, dims.nz, FORWARD)
        buf = moved(buf, ORDER_ZXY, ORDER_XYZ)
    elif direction == BACKWARD:
        buf = moved(buf, ORDER_XYZ, ORDER_YZX)
        buf = moved(buf, ORDER_YZX, ORDER_ZXY)
        buf = sweep(buf, dims.nz, BACKWARD)
        buf = moved(buf, ORDER_ZXY, ORDER_YZX)
        buf = sweep(buf, dims.ny, BACKWARD)
        buf = moved(buf, ORDER_YZX, ORDER_XYZ)
        buf = sweep(buf, dims.nx, BACKWARD)
        buf *= 1.0 / dims.total
    else:
        raise ConfigError(f"direction must be forward or backward, got {direction!r}")
    ensure_finite(buf, f"{direction} transform output")
    return Tensor3(extents, tensor.axis_order, buf)
