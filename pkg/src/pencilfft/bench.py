"""Timing harness and the CSV timing-matrix emitter.

Each configuration is timed over R runs.  A run is: world barrier, then
one forward transform, timed per rank on the monotonic clock; the
per-rank walls are reduced to (min, max) on rank 0.  The headline
number of a configuration is the best (smallest) of the per-run maxima,
reported in a summary row with run="best".

Configurations that cannot run (over-decomposition, k not dividing an
exchanged axis) become rows with run="skipped", empty wall columns, and
a trailing reason cell; the column schema itself never changes.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

from .decomp import ProcessGrid, descriptor_for
from .errors import GridError, InvalidChunkError, OverDecompositionError
from .pipeline import DistributedTensor, StrategyConfig, create, validate_strategy
from .tensor import TensorDims

CSV_COLUMNS = [
    "size", "ranks", "py", "pz", "scheme", "option", "k",
    "transport", "run", "wall_max_s", "wall_min_s",
]


def size_label(dims: TensorDims) -> str:
    if dims.nx == dims.ny == dims.nz:
        return str(dims.nx)
    return f"{dims.nx}x{dims.ny}x{dims.nz}"


@dataclass(frozen=True)
class BenchConfig:
    """One row group of the timing matrix."""

    dims: TensorDims
    grid: ProcessGrid
    scheme: str
    option: int
    k: int
    transport: str
    runs: int
    seed: int
    restore: bool = True

    @property
    def ranks(self) -> int:
        return self.grid.p_total

    def base_cells(self) -> dict:
        return {
            "size": size_label(self.dims),
            "ranks": str(self.ranks),
            "py": str(self.grid.py),
            "pz": str(self.grid.pz),
            "scheme": self.scheme,
            "option": str(self.option),
            "k": str(self.k),
            "transport": self.transport,
        }


@dataclass
class TimingReport:
    """Per-run (wall_min, wall_max) pairs for one configuration, on rank 0."""

    config: BenchConfig
    per_run: list

    @property
    def best_max(self) -> float:
        return min(mx for _, mx in self.per_run)

    @property
    def best_min(self) -> float:
        return min(mn for mn, _ in self.per_run)

    def rows(self) -> list:
        rows = []
        for i, (mn, mx) in enumerate(self.per_run, 1):
            rows.append(dict(self.config.base_cells(), run=str(i),
                             wall_max_s=f"{mx:.6f}", wall_min_s=f"{mn:.6f}"))
        rows.append(dict(self.config.base_cells(), run="best",
                         wall_max_s=f"{self.best_max:.6f}",
                         wall_min_s=f"{self.best_min:.6f}"))
        return rows


def config_problem(cfg: BenchConfig) -> str | None:
    """Why this configuration cannot run, or None if it can."""
    try:
        desc = descriptor_for(cfg.dims, cfg.scheme, cfg.grid)
        validate_strategy(desc, StrategyConfig.from_option(cfg.option, cfg.k), cfg.restore)
    except (OverDecompositionError, GridError, InvalidChunkError) as exc:
        return str(exc)
    return None


def skipped_rows(cfg: BenchConfig, reason: str) -> list:
    return [dict(cfg.base_cells(), run="skipped", wall_max_s="", wall_min_s="",
                 reason=reason)]


def measure(ctx, cfg: BenchConfig, wrap_comms=None, collect_output=False):
    """Time cfg.runs forward transforms.

    Returns (TimingReport, gathered output tensor) on rank 0 and
    (None, None) elsewhere; the gathered tensor is None unless
    collect_output is set.
    """
    from .pipeline import gather_global

    desc = descriptor_for(cfg.dims, cfg.scheme, cfg.grid)
    strategy = StrategyConfig.from_option(cfg.option, cfg.k)
    handle = create(cfg.dims, cfg.grid, strategy, ctx,
                    restore=cfg.restore, wrap_comms=wrap_comms)
    inp = DistributedTensor.seeded(cfg.seed, desc, ctx.rank)
    per_run = []
    out = None
    for _ in range(cfg.runs):
        handle.world.barrier()
        t0 = time.perf_counter()
        out = handle.forward(inp)
        t1 = time.perf_counter()
        minmax = handle.world.reduce_minmax(t1 - t0)
        if minmax is not None:
            per_run.append(minmax)
    gathered = gather_global(out, handle.world) if collect_output else None
    if ctx.rank != 0:
        return None, None
    return TimingReport(cfg, per_run), gathered


def run_matrix_inproc(configs) -> list:
    """Run each configuration on its own in-process fabric; returns all rows."""
    from .transport.inproc import InprocFabric

    rows = []
    for cfg in configs:
        reason = config_problem(cfg)
        if reason is not None:
            rows.extend(skipped_rows(cfg, reason))
            continue

        def worker(ctx, cfg=cfg):
            return measure(ctx, cfg)[0]

        report = InprocFabric(cfg.ranks).run(worker)[0]
        rows.extend(report.rows())
    return rows


def run_matrix_on_context(ctx, configs) -> list:
    """Run configurations on an existing fabric context (the TCP path).

    Every configuration must use the fabric's rank count; skip decisions
    are deterministic, so all ranks agree without communicating.  Rank 0
    returns the rows, other ranks an empty list.
    """
    rows = []
    for cfg in configs:
        if cfg.ranks != ctx.nranks:
            raise GridError(
                f"configuration wants {cfg.ranks} ranks, fabric has {ctx.nranks}"
            )
        reason = config_problem(cfg)
        if reason is not None:
            if ctx.rank == 0:
                rows.extend(skipped_rows(cfg, reason))
            continue
        report, _ = measure(ctx, cfg)
        if report is not None:
            rows.extend(report.rows())
    return rows


def write_csv(rows, stream) -> None:
    """Write the fixed header plus data rows; skipped rows carry a reason cell."""
    writer = csv.writer(stream)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        cells = [row.get(col, "") for col in CSV_COLUMNS]
        if row.get("reason"):
            cells.append(row["reason"])
        writer.writerow(cells)
