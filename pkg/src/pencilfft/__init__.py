"""Distributed-memory parallel 3D complex FFT with pencil decomposition.

The transform runs as three 1D FFT sweeps joined by chunked global
transposes over a 2D process grid, with optional compute/communication
overlap.  Transports are pluggable: ranks can be threads in one process
or TCP-connected processes.
"""

from .decomp import (
    PencilDescriptor,
    ProcessGrid,
    SlabDescriptor,
    grid_factorize,
    max_ranks,
    pencil_extents,
    slab_extents,
)
from .errors import PencilFFTError
from .fft1d import BACKWARD, FORWARD, Plan1D, dft_oracle, fft_batch, plan_create
from .pipeline import (
    DistributedTensor,
    ParallelFFT3D,
    StrategyConfig,
    backward,
    create,
    forward,
    gather_global,
    serial_3dfft,
    stats,
)
from .sampling import random_block, random_tensor
from .tensor import Tensor3, TensorDims, read_tensor, write_tensor
from .verify import dft3_oracle, roundtrip_check

__version__ = "0.1.0"

__all__ = [
    "BACKWARD",
    "DistributedTensor",
    "FORWARD",
    "ParallelFFT3D",
    "PencilDescriptor",
    "PencilFFTError",
    "Plan1D",
    "ProcessGrid",
    "SlabDescriptor",
    "StrategyConfig",
    "Tensor3",
    "TensorDims",
    "__version__",
    "backward",
    "create",
    "dft3_oracle",
    "dft_oracle",
    "fft_batch",
    "forward",
    "gather_global",
    "grid_factorize",
    "max_ranks",
    "pencil_extents",
    "plan_create",
    "random_block",
    "random_tensor",
    "read_tensor",
    "roundtrip_check",
    "serial_3dfft",
    "slab_extents",
    "stats",
    "write_tensor",
]
