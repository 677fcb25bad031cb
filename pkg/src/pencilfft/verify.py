"""Independent correctness oracles and quantitative verification checks.

The 3D oracle evaluates the transform definition as an explicit sum over
all input points, one output point at a time.  It shares index algebra
with the rest of the package but none of the FFT machinery, so agreement
with the pipeline is meaningful evidence.  Its cost is quadratic in the
point count and it refuses to run past a hard size guard.

Checks over distributed tensors gather to rank 0 first; only rank 0
returns a report, other ranks return None.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .decomp import PencilDescriptor, ProcessGrid
from .errors import OracleSizeError, ShapeMismatchError
from .fft1d import BACKWARD, FORWARD
from .pipeline import DistributedTensor, StrategyConfig, create, gather_global
from .sampling import random_tensor
from .tensor import Tensor3, TensorDims

ORACLE_MAX_ELEMS = 4096

TOL_FORWARD_MAX_ABS = 1e-10
TOL_ROUNDTRIP_MAX_ABS = 1e-12
TOL_PARSEVAL_REL = 1e-10


def dft3_oracle(tensor: Tensor3, direction: str) -> Tensor3:
    """Brute-force 3D DFT straight from the definition; O(total^2) work."""
    nx, ny, nz = tensor.extents
    total = nx * ny * nz
    if total > ORACLE_MAX_ELEMS:
        raise OracleSizeError(
            f"oracle limited to {ORACLE_MAX_ELEMS} points, got {nx}x{ny}x{nz}={total}"
        )
    if direction not in (FORWARD, BACKWARD):
        raise ShapeMismatchError(f"direction must be forward or backward, got {direction!r}")
    sign = -2.0 * np.pi if direction == FORWARD else 2.0 * np.pi
    a = tensor.as_array3d()
    fx = np.arange(nx) / nx
    fy = np.arange(ny) / ny
    fz = np.arange(nz) / nz
    out = np.empty((nx, ny, nz), dtype=np.complex128)
    for kx in range(nx):
        for ky in range(ny):
            for kz in range(nz):
                phase = sign * (
                    kx * fx[:, None, None] + ky * fy[None, :, None] + kz * fz[None, None, :]
                )
                out[kx, ky, kz] = np.sum(a * np.exp(1j * phase))
    if direction == BACKWARD:
        out /= total
    return Tensor3.from_array(out)


def compare(actual: Tensor3, expected: Tensor3) -> dict:
    """Error metrics between two identically laid out tensors."""
    if actual.extents != expected.extents or actual.axis_order != expected.axis_order:
        raise ShapeMismatchError(
            f"cannot compare {actual.extents}/{actual.axis_order} with "
            f"{expected.extents}/{expected.axis_order}"
        )
    diff = actual.data - expected.data
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
    ref = float(np.linalg.norm(expected.data))
    dn = float(np.linalg.norm(diff))
    if ref > 0.0:
        rel_l2 = dn / ref
    else:
        rel_l2 = 0.0 if dn == 0.0 else float("inf")
    return {"max_abs_error": max_abs, "rel_l2_error": rel_l2}


def parseval_gap(spatial: Tensor3, spectrum: Tensor3) -> float:
    """Relative gap between input energy and 1/N-scaled spectrum energy.

    For the unnormalized forward transform, sum |X|^2 = N * sum |x|^2.
    """
    if spatial.extents != spectrum.extents:
        raise ShapeMismatchError(
            f"extents differ: {spatial.extents} vs {spectrum.extents}"
        )
    n = spatial.data.size
    e_in = float(np.sum(np.abs(spatial.data) ** 2))
    e_out = float(np.sum(np.abs(spectrum.data) ** 2)) / n
    if e_in == 0.0:
        return 0.0 if e_out == 0.0 else float("inf")
    return abs(e_out - e_in) / e_in


@dataclass
class CheckResult:
    """Outcome of one verification check."""

    name: str
    metrics: dict
    thresholds: dict
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "metrics": self.metrics,
            "thresholds": self.thresholds,
            "passed": self.passed,
        }


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    def add(self, check: CheckResult) -> None:
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def check_against(name: str, actual: Tensor3, expected: Tensor3, tol: float) -> CheckResult:
    metrics = compare(actual, expected)
    return CheckResult(
        name=name,
        metrics=metrics,
        thresholds={"max_abs_error": tol},
        passed=metrics["max_abs_error"] <= tol,
    )


def check_parseval(spatial: Tensor3, spectrum: Tensor3,
                   rtol: float = TOL_PARSEVAL_REL) -> CheckResult:
    gap = parseval_gap(spatial, spectrum)
    return CheckResult(
        name="parseval",
        metrics={"rel_energy_gap": gap},
        thresholds={"rel_energy_gap": rtol},
        passed=gap <= rtol,
    )


def distributed_checks(ctx, dims: TensorDims, grid: ProcessGrid, strategy: StrategyConfig,
                       seed: int, restore: bool = True,
                       forward_tol: float = TOL_FORWARD_MAX_ABS,
                       roundtrip_tol: float = TOL_ROUNDTRIP_MAX_ABS,
                       parseval_rtol: float = TOL_PARSEVAL_REL):
    """Run the standard check set on one transform configuration.

    Every rank participates; rank 0 gets (VerifyReport, gathered forward
    spectrum), the rest get (None, None).  The brute-force oracle check
    joins in only when the size guard allows it.
    """
    desc = PencilDescriptor(dims, grid)
    handle = create(dims, grid, strategy, ctx, restore=restore)
    inp = DistributedTensor.seeded(seed, desc, ctx.rank)
    spectrum = handle.forward(inp)
    back = handle.backward(spectrum)
    g_spectrum = gather_global(spectrum, handle.world)
    g_back = gather_global(back, handle.world)
    if g_spectrum is None:
        return None, None
    g_input = random_tensor(seed, dims)
    report = VerifyReport()
    if dims.total <= ORACLE_MAX_ELEMS:
        expected = dft3_oracle(g_input, FORWARD)
        report.add(check_against("forward-vs-oracle", g_spectrum, expected, forward_tol))
    report.add(check_against("roundtrip", g_back, g_input, roundtrip_tol))
    report.add(check_parseval(g_input, g_spectrum, parseval_rtol))
    return report, g_spectrum


def roundtrip_check(dims: TensorDims, grid: ProcessGrid, strategy: StrategyConfig,
                    seed: int = 42, restore: bool = True,
                    tol: float = TOL_ROUNDTRIP_MAX_ABS) -> CheckResult:
    """forward then backward over an in-process fabric; compares against the input."""
    from .transport.inproc import InprocFabric

    desc = PencilDescriptor(dims, grid)

    def worker(ctx):
        handle = create(dims, grid, strategy, ctx, restore=restore)
        inp = DistributedTensor.seeded(seed, desc, ctx.rank)
        back = handle.backward(handle.forward(inp))
        return gather_global(back, handle.world)

    results = InprocFabric(grid.p_total).run(worker)
    return check_against("roundtrip", results[0], random_tensor(seed, dims), tol)
