"""Grid containers, coordinate conventions and the NGF binary field format.

Conventions used throughout the package:

* 2D data is stored row-major as ``(height, width)`` float64 arrays;
  pixel ``(x, y)`` lives at ``data[y, x]``.
* Lifted data is ``(height, width, n_theta)`` complex128 with the
  orientation axis fastest, so per-pixel fibres are contiguous.
* Orientations span ``[0, pi)``: ``theta_k = k * pi / n_theta`` and all
  orientation index arithmetic wraps mod ``n_theta``.

NGF file layout (all integers little-endian):

    magic   4 bytes  b"NGF1"
    rank    uint32
    dims    rank * uint32
    flag    1 byte   0 = real payload, 1 = complex payload
    payload float64, row-major, complex stored interleaved (re, im)

A JSON sidecar ``<file>.json`` with ``{nTheta, spacing, provenance}`` is
written next to every NGF file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError, FormatError, UnsupportedFormat

NGF_MAGIC = b"NGF1"


def _frozen_array(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ScalarField2D:
    """Real-valued image or activity on a regular pixel grid."""

    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        arr = _frozen_array(self.data, np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError("ScalarField2D needs a 2D array with width, height >= 1")
        if not np.isfinite(arr).all():
            raise DataError("ScalarField2D contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def with_data(self, data) -> "ScalarField2D":
        return ScalarField2D(data, spacing=self.spacing)


@dataclass(frozen=True)
class LiftedField3D:
    """Complex field on R^2 x S^1, orientation axis periodic and fastest."""

    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        arr = _frozen_array(self.data, np.complex128)
        if arr.ndim != 3 or arr.shape[2] < 2:
            raise DataError("LiftedField3D needs shape (height, width, n_theta>=2)")
        if not np.isfinite(arr).all():
            raise DataError("LiftedField3D contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def n_theta(self):
        return self.data.shape[2]

    @property
    def theta_values(self):
        return np.arange(self.n_theta) * np.pi / self.n_theta

    def wrap_theta(self, k):
        """Orientation index arithmetic: -1 -> n_theta-1, n_theta -> 0."""
        return int(k) % self.n_theta


@dataclass(frozen=True)
class VectorField2D:
    """Two-component field, e.g. the completion field A(x, y)."""

    ax: np.ndarray
    ay: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        ax = _frozen_array(self.ax, np.float64)
        ay = _frozen_array(self.ay, np.float64)
        if ax.ndim != 2 or ax.shape != ay.shape:
            raise DataError("VectorField2D components must share a 2D shape")
        if not (np.isfinite(ax).all() and np.isfinite(ay).all()):
            raise DataError("VectorField2D contains non-finite values")
        object.__setattr__(self, "ax", ax)
        object.__setattr__(self, "ay", ay)

    @property
    def height(self):
        return self.ax.shape[0]

    @property
    def width(self):
        return self.ax.shape[1]

    def magnitude(self):
        return np.hypot(self.ax, self.ay)


def write_array(path, arr, n_theta=None, spacing=1.0, provenance=""):
    """Write a real or complex ndarray as an NGF file plus JSON sidecar."""
    arr = np.ascontiguousarray(arr)
    if not np.isfinite(arr).all():
        raise DataError("refusing to write non-finite values")
    is_complex = np.iscomplexobj(arr)
    with open(path, "wb") as fh:
        fh.write(NGF_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(struct.pack("B", 1 if is_complex else 0))
        if is_complex:
            inter = np.empty(arr.shape + (2,), dtype="<f8")
            inter[..., 0] = arr.real
            inter[..., 1] = arr.imag
            fh.write(inter.tobytes())
        else:
            fh.write(arr.astype("<f8", copy=False).tobytes())
    meta = {"nTheta": n_theta, "spacing": spacing, "provenance": provenance}
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def read_array(path):
    """Read an NGF file; returns ``(array, meta_dict)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != NGF_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {NGF_MAGIC!r}")
    if len(blob) < 8:
        raise FormatError("truncated header")
    (rank,) = struct.unpack_from("<I", blob, 4)
    if rank < 1 or rank > 8:
        raise FormatError(f"implausible rank {rank}")
    header = 8 + 4 * rank + 1
    if len(blob) < header:
        raise FormatError("truncated dims")
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    flag = blob[8 + 4 * rank]
    if flag not in (0, 1):
        raise FormatError(f"bad payload flag {flag}")
    count = int(np.prod(dims)) * (2 if flag else 1)
    expected = header + 8 * count
    if len(blob) != expected:
        raise FormatError(f"payload length {len(blob) - header}, expected {expected - header}")
    raw = np.frombuffer(blob, dtype="<f8", count=count, offset=header)
    if flag:
        arr = raw.reshape(dims + (2,))
        arr = (arr[..., 0] + 1j * arr[..., 1]).reshape(dims)
    else:
        arr = raw.reshape(dims).astype(np.float64)
    if not np.isfinite(arr).all():
        raise DataError("NGF payload contains non-finite values")
    meta = {"nTheta": None, "spacing": 1.0, "provenance": ""}
    try:
        with open(str(path) + ".json") as fh:
            meta.update(json.load(fh))
    except (OSError, ValueError):
        pass
    return arr, meta


def write_field(path, fld, provenance=""):
    """Serialize a ScalarField2D or LiftedField3D to NGF."""
    if isinstance(fld, ScalarField2D):
        write_array(path, fld.data, spacing=fld.spacing, provenance=provenance)
    elif isinstance(fld, LiftedField3D):
        write_array(path, fld.data, n_theta=fld.n_theta, spacing=fld.spacing,
                    provenance=provenance)
    elif isinstance(fld, VectorField2D):
        write_array(path, np.stack([fld.ax, fld.ay], axis=-1),
                    spacing=fld.spacing, provenance=provenance)
    else:
        raise TypeError(f"cannot serialize {type(fld).__name__}")


def read_field(path):
    """Read an NGF file back into a field container.

    Rank 2 -> ScalarField2D, rank 3 complex -> LiftedField3D,
    rank 3 real with trailing dim 2 -> VectorField2D.
    """
    arr, meta = read_array(path)
    spacing = float(meta.get("spacing") or 1.0)
    if arr.ndim == 2:
        return ScalarField2D(arr.real if np.iscomplexobj(arr) else arr, spacing=spacing)
    if arr.ndim == 3:
        if np.iscomplexobj(arr):
            return LiftedField3D(arr, spacing=spacing)
        if arr.shape[2] == 2:
            return VectorField2D(arr[..., 0], arr[..., 1], spacing=spacing)
        return LiftedField3D(arr.astype(np.complex128), spacing=spacing)
    raise FormatError(f"rank-{arr.ndim} NGF is not a field; use read_array")


def load_png_grayscale(path, spacing=1.0) -> ScalarField2D:
    """Load an 8- or 16-bit grayscale PNG, scaled to [0, 1]."""
    img = Image.open(path)
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64) / 255.0
    elif img.mode in ("I", "I;16", "I;16B"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    else:
        raise UnsupportedFormat(f"mode {img.mode!r} is not 8/16-bit grayscale")
    return ScalarField2D(arr, spacing=spacing)


def save_png_grayscale(path, fld, lo=0.0, hi=1.0):
    """Write a ScalarField2D as an 8-bit grayscale PNG, clipping to [lo, hi]."""
    arr = np.clip((fld.data - lo) / max(hi - lo, 1e-300), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)
