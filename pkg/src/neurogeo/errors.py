"""Exception hierarchy shared by all neurogeo modules."""


class NeurogeoError(Exception):
    """Base class for all package errors."""


class FormatError(NeurogeoError):
    """Malformed NGF file: bad magic, bad rank, or truncated payload."""


class DataError(NeurogeoError):
    """Payload or histogram content violates an invariant (non-finite, empty row)."""


class UnsupportedFormat(NeurogeoError):
    """Input image is not an 8- or 16-bit grayscale PNG."""


class SizeError(NeurogeoError):
    """Image smaller than the filter stencil it is convolved with."""


class SolverError(NeurogeoError):
    """Iterative solver failed to reach its residual/update tolerance.

    Carries the achieved residual in ``residual`` when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StabilityError(NeurogeoError):
    """Explicit time step violates the CFL constraint."""


class EmptyInput(NeurogeoError):
    """Operation received an empty support / point set."""


class CompletionDegenerate(UserWarning):
    """Grouping produced no usable unit; completion fell back to stage 1."""
