"""Neurogeometric perception toolbox.

Orientation lifting of images to R^2 x S^1, sub-Riemannian connectivity
kernels, spectral grouping into perceptual units, variational
contour/brightness completion, and edge co-occurrence statistics.
"""

from .errors import (
    CompletionDegenerate,
    DataError,
    EmptyInput,
    FormatError,
    NeurogeoError,
    SizeError,
    SolverError,
    StabilityError,
    UnsupportedFormat,
)
from .grids import (
    LiftedField3D,
    ScalarField2D,
    VectorField2D,
    load_png_grayscale,
    read_array,
    read_field,
    save_png_grayscale,
    write_array,
    write_field,
)

__version__ = "0.1.0"
