"""Exception types shared across the library.

Every error raised on a deliberate validation path derives from
PencilFFTError, so callers can distinguish "you misused the library"
from genuine bugs.  Transport failures get their own branch because
they identify a remote rank rather than a local argument.
"""


class PencilFFTError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSizeError(PencilFFTError, ValueError):
    """A tensor extent is not a power of two, or a buffer has the wrong length."""


class NonFiniteError(PencilFFTError, ValueError):
    """A NaN or Inf showed up in transform input or output."""


class ConfigError(PencilFFTError, ValueError):
    """An execution-strategy option or flag combination is invalid."""


class GridError(PencilFFTError, ValueError):
    """Rank count or process-grid factorization is inconsistent."""


class OverDecompositionError(GridError):
    """More ranks requested along an axis than there are grid points."""


class InvalidChunkError(PencilFFTError, ValueError):
    """The chunk count does not evenly divide the axis being split."""


class LayoutError(PencilFFTError, RuntimeError):
    """A distributed tensor arrived at a stage in the wrong pencil layout."""


class ShapeMismatchError(PencilFFTError, ValueError):
    """Two tensors being compared do not share extents and axis order."""


class OracleSizeError(PencilFFTError, ValueError):
    """The brute-force oracle was asked to handle more points than it allows."""


class FileFormatError(PencilFFTError, ValueError):
    """A tensor file has a bad magic, version, or payload length."""


class TransportError(PencilFFTError, RuntimeError):
    """A communication peer failed, disconnected, or timed out."""


class ProtocolError(TransportError):
    """Peers disagreed about collective ordering or message framing."""
