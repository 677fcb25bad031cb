"""Command-line front end: bench, verify, dump, load, info, report.

The inproc transport runs all ranks as threads inside this process; the
tcp transport runs one process per rank, each invoked with --rank and a
shared --hosts file, and rank 0 alone emits output.
"""

from __future__ import annotations

import argparse
import sys

from . import bench as bench_mod
from . import report as report_mod
from .decomp import (
    SCHEME_CELL,
    SCHEME_PENCIL,
    SCHEME_SLAB,
    ProcessGrid,
    descriptor_for,
    grid_factorize,
    max_ranks,
)
from .errors import (
    ConfigError,
    FileFormatError,
    GridError,
    InvalidChunkError,
    InvalidSizeError,
    OracleSizeError,
    PencilFFTError,
    ShapeMismatchError,
)
from .pipeline import StrategyConfig
from .sampling import random_tensor
from .tensor import TensorDims, read_tensor, write_tensor
from .transport import TRANSPORT_INPROC, TRANSPORT_TCP, TRANSPORTS
from .transport.inproc import InprocFabric
from .transport.tcp import TcpFabric, parse_hosts
from .verify import distributed_checks

_USAGE_ERRORS = (
    ConfigError,
    GridError,
    InvalidChunkError,
    InvalidSizeError,
    FileFormatError,
    OracleSizeError,
    ShapeMismatchError,
)


def _parse_int_list(text: str, flag: str) -> list:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} got no values in {text!r}")
    return values


def _dims_list(args, multi: bool) -> list:
    if args.size is None and args.dims is None:
        raise ConfigError("one of --size or --dims is required")
    if args.size is not None and args.dims is not None:
        raise ConfigError("--size and --dims are mutually exclusive")
    if args.dims is not None:
        parts = _parse_int_list(args.dims, "--dims")
        if len(parts) != 3:
            raise ConfigError(f"--dims expects NX,NY,NZ, got {args.dims!r}")
        return [TensorDims(*parts)]
    sizes = _parse_int_list(args.size, "--size")
    if not multi and len(sizes) != 1:
        raise ConfigError("--size takes a single value here")
    return [TensorDims(n, n, n) for n in sizes]


def _single(values: list, flag: str):
    if len(values) != 1:
        raise ConfigError(f"{flag} takes a single value here")
    return values[0]


def _grid_for(scheme: str, ranks: int, grid_arg) -> ProcessGrid:
    if grid_arg is not None:
        py, pz = grid_arg
        if scheme == SCHEME_SLAB:
            if py != 1 or pz != ranks:
                raise GridError(f"slab layout needs grid 1x{ranks}, got {py}x{pz}")
            return ProcessGrid(1, ranks)
        return grid_factorize(ranks, py=py, pz=pz)
    if scheme == SCHEME_SLAB:
        return ProcessGrid(1, ranks)
    return grid_factorize(ranks)


def _parse_grid_arg(text: str):
    parts = _parse_int_list(text, "--grid")
    if len(parts) != 2:
        raise ConfigError(f"--grid expects PY,PZ, got {text!r}")
    return parts[0], parts[1]


def _tcp_setup(args):
    if args.hosts is None:
        raise ConfigError("--transport tcp requires --hosts")
    if args.rank is None:
        raise ConfigError("--transport tcp requires --rank")
    hosts = parse_hosts(args.hosts)
    if not 0 <= args.rank < len(hosts):
        raise ConfigError(f"--rank {args.rank} outside hosts file of {len(hosts)} entries")
    return hosts


def _ranks_for_transport(args, hosts) -> list:
    if args.transport == TRANSPORT_TCP:
        ranks = [len(hosts)]
        if args.ranks is not None:
            requested = _parse_int_list(args.ranks, "--ranks")
            if requested != ranks:
                raise GridError(
                    f"--ranks {args.ranks} does not match hosts file of {len(hosts)} ranks"
                )
        return ranks
    if args.ranks is None:
        raise ConfigError("--ranks is required with --transport inproc")
    return _parse_int_list(args.ranks, "--ranks")


# -- bench ------------------------------------------------------------


def cmd_bench(args) -> int:
    dims_list = _dims_list(args, multi=True)
    hosts = _tcp_setup(args) if args.transport == TRANSPORT_TCP else None
    ranks_list = _ranks_for_transport(args, hosts)
    options = _parse_int_list(args.option, "--option")
    for opt in options:
        StrategyConfig.from_option(opt, args.k)
    grid_arg = _parse_grid_arg(args.grid) if args.grid else None
    if grid_arg is not None and len(ranks_list) > 1:
        raise ConfigError("--grid needs a single --ranks value")

    configs = []
    for dims in dims_list:
        for ranks in ranks_list:
            grid = _grid_for(args.scheme, ranks, grid_arg)
            for option in options:
                configs.append(bench_mod.BenchConfig(
                    dims=dims, grid=grid, scheme=args.scheme, option=option,
                    k=args.k, transport=args.transport, runs=args.runs,
                    seed=args.seed, restore=not args.no_restore,
                ))
    if args.dump is not None and len(configs) != 1:
        raise ConfigError("--dump needs exactly one benchmark configuration")

    dumped = None
    if args.transport == TRANSPORT_TCP:
        with TcpFabric(args.rank, hosts) as fabric:
            ctx = fabric.context()
            if args.dump is not None:
                reason = bench_mod.config_problem(configs[0])
                if reason is not None:
                    raise ConfigError(f"cannot dump a skipped configuration: {reason}")
                report, dumped = bench_mod.measure(ctx, configs[0], collect_output=True)
                rows = report.rows() if report is not None else []
            else:
                rows = bench_mod.run_matrix_on_context(ctx, configs)
            ctx.world().barrier()
        if ctx.rank != 0:
            return 0
    else:
        if args.dump is not None:
            reason = bench_mod.config_problem(configs[0])
            if reason is not None:
                raise ConfigError(f"cannot dump a skipped configuration: {reason}")

            def worker(ctx):
                return bench_mod.measure(ctx, configs[0], collect_output=True)

            report, dumped = InprocFabric(configs[0].ranks).run(worker)[0]
            rows = report.rows()
        else:
            rows = bench_mod.run_matrix_inproc(configs)

    if args.dump is not None and dumped is not None:
        write_tensor(args.dump, dumped)
    if args.csv is not None:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            bench_mod.write_csv(rows, fh)
    else:
        bench_mod.write_csv(rows, sys.stdout)
    if args.figures:
        written = report_mod.render_from_rows(rows, args.figures)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


# -- verify -----------------------------------------------------------


def cmd_verify(args) -> int:
    dims = _single(_dims_list(args, multi=True), "--size")
    hosts = _tcp_setup(args) if args.transport == TRANSPORT_TCP else None
    ranks = _single(_ranks_for_transport(args, hosts), "--ranks")
    grid_arg = _parse_grid_arg(args.grid) if args.grid else None
    grid = _grid_for(args.scheme, ranks, grid_arg)
    descriptor_for(dims, args.scheme, grid)  # slab rank limit applies here
    strategy = StrategyConfig.from_option(args.option, args.k)
    restore = not args.no_restore
    seed = args.seed

    def worker(ctx):
        return distributed_checks(ctx, dims, grid, strategy, seed, restore=restore)

    if args.transport == TRANSPORT_TCP:
        with TcpFabric(args.rank, hosts) as fabric:
            ctx = fabric.context()
            report, spectrum = worker(ctx)
            ctx.world().barrier()
        if ctx.rank != 0:
            return 0
    else:
        report, spectrum = InprocFabric(ranks).run(worker)[0]

    if args.dump is not None and spectrum is not None:
        write_tensor(args.dump, spectrum)
    if args.json:
        print(report.to_json())
    else:
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            metrics = ", ".join(f"{k}={v:.3e}" for k, v in check.metrics.items())
            tols = ", ".join(f"{k}<={v:.1e}" for k, v in check.thresholds.items())
            print(f"{check.name}: {status} ({metrics}; require {tols})")
    return 0 if report.passed else 1


# -- dump / load / info / report --------------------------------------


def cmd_dump(args) -> int:
    dims = _single(_dims_list(args, multi=True), "--size")
    write_tensor(args.out, random_tensor(args.seed, dims))
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_load(args) -> int:
    import numpy as np

    tensor = read_tensor(args.path)
    nx, ny, nz = tensor.extents
    print(f"file: {args.path}")
    print(f"dims: {nx}x{ny}x{nz} ({tensor.data.size} points)")
    print(f"l2_norm: {float(np.linalg.norm(tensor.data)):.12e}")
    print(f"max_abs: {float(np.max(np.abs(tensor.data))):.12e}")
    return 0


def cmd_info(args) -> int:
    dims = _single(_dims_list(args, multi=True), "--size")
    print(f"dims: {dims.nx}x{dims.ny}x{dims.nz} ({dims.total} points)")
    for scheme in (SCHEME_SLAB, SCHEME_PENCIL, SCHEME_CELL):
        print(f"P_max {scheme}: {max_ranks(dims, scheme)}")
    return 0


def cmd_report(args) -> int:
    written = report_mod.render_figures(args.csv, args.figures)
    if not written:
        print("no summary rows to plot", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


# -- parser -----------------------------------------------------------


def _add_dims_args(p) -> None:
    p.add_argument("--size", help="cubic grid size N (meaning N x N x N)")
    p.add_argument("--dims", help="explicit grid extents NX,NY,NZ")


def _add_transform_args(p) -> None:
    p.add_argument("--ranks", help="number of ranks")
    p.add_argument("--grid", help="process grid override PY,PZ")
    p.add_argument("--scheme", choices=(SCHEME_PENCIL, SCHEME_SLAB),
                   default=SCHEME_PENCIL, help="decomposition scheme")
    p.add_argument("--k", type=int, default=2, help="chunks per exchange (default 2)")
    p.add_argument("--transport", choices=TRANSPORTS, default=TRANSPORT_INPROC)
    p.add_argument("--hosts", help="hosts file for --transport tcp ('rank host:port' lines)")
    p.add_argument("--rank", type=int, help="this process's rank (tcp only)")
    p.add_argument("--seed", type=int, default=42, help="input field seed (default 42)")
    p.add_argument("--no-restore", action="store_true",
                   help="skip the final transposes; forward output stays in Z-pencil layout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pencilfft",
        description="Distributed 3D complex FFT: benchmark, verify, and inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="time forward transforms and emit a CSV matrix")
    _add_dims_args(p)
    _add_transform_args(p)
    p.add_argument("--option", default="4",
                   help="execution strategy 1|2|3|4; comma list allowed (default 4)")
    p.add_argument("--runs", type=int, default=5, help="timed runs per configuration (default 5)")
    p.add_argument("--csv", help="write the timing matrix here instead of stdout")
    p.add_argument("--dump", help="write the gathered forward output (single configuration only)")
    p.add_argument("--figures", help="directory for rendered timing figures")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="check a configuration against oracles")
    _add_dims_args(p)
    _add_transform_args(p)
    p.add_argument("--option", type=int, default=4, help="execution strategy 1|2|3|4 (default 4)")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.add_argument("--dump", help="write the gathered forward output here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump", help="write the seeded input field to a tensor file")
    _add_dims_args(p)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="output tensor file")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("load", help="read a tensor file and print a summary")
    p.add_argument("path", help="tensor file to read")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("info", help="print decomposition limits for a grid size")
    _add_dims_args(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("report", help="render figures from an existing benchmark CSV")
    p.add_argument("--csv", required=True, help="benchmark CSV to read")
    p.add_argument("--figures", required=True, help="directory for rendered figures")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PencilFFTError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
