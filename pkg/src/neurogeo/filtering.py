"""Receptive-profile banks and the lift of images to R^2 x S^1.

The oriented family used for lifting is, at unit scale,

    psi_theta(u1, u2) = exp(-i*(u1*sin(theta) - u2*cos(theta)) - (u1^2 + u2^2))

sampled on integer offsets and truncated at ``support_radius``.  A scale
``sigma`` stretches both carrier and envelope (coordinates divided by
``sigma``), keeping the same number of carrier cycles under the envelope.
All filters are zero-DC corrected (complex mean subtracted) so constant
images produce exactly zero response.

Orientation ``theta`` is the direction of the level line a cell responds
to; ``theta_k = k*pi/n_theta`` on [0, pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import SizeError
from .grids import LiftedField3D, ScalarField2D


def _offset_grid(radius):
    u = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.meshgrid(u, u, indexing="xy")  # u1 = x offsets, u2 = y offsets


def conv_reflect(img, stencil):
    """2D convolution with reflective (mirror) image boundaries."""
    r = stencil.shape[0] // 2
    if img.shape[0] < stencil.shape[0] or img.shape[1] < stencil.shape[1]:
        raise SizeError(f"image {img.shape} smaller than stencil {stencil.shape}")
    padded = np.pad(img, r, mode="symmetric")
    out = fftconvolve(padded, stencil, mode="same")
    return out[r:-r, r:-r] if r else out


def correlate_reflect(img, stencil):
    """Cross-correlation (stencil indexed by offsets) with reflective boundaries."""
    return conv_reflect(img, stencil[::-1, ::-1])


def log_filter(sigma, support_radius):
    """Laplacian-of-Gaussian stencil for G = exp(-(u1^2+u2^2)/sigma^2).

    Samples Delta G on integer offsets, then subtracts the mean so the
    stencil sums to zero exactly (zero-DC).  Requires
    ``support_radius >= 3*sigma``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if support_radius < 3 * sigma:
        raise ValueError("support_radius must be at least 3*sigma")
    u1, u2 = _offset_grid(int(support_radius))
    r2 = u1**2 + u2**2
    g = np.exp(-r2 / sigma**2)
    stencil = (4.0 * r2 / sigma**4 - 4.0 / sigma**2) * g
    return stencil - stencil.mean()


def lgn_output(image: ScalarField2D, stencil) -> ScalarField2D:
    """Convolve an image with a (LoG) stencil, reflective boundaries."""
    return image.with_data(conv_reflect(image.data, stencil))


@dataclass(frozen=True)
class GaborBank:
    """Oriented complex filters, one per orientation bin on [0, pi)."""

    n_theta: int
    sigma: float
    support_radius: int
    filters: np.ndarray  # (n_theta, 2r+1, 2r+1) complex, zero-DC

    @property
    def theta_values(self):
        return np.arange(self.n_theta) * np.pi / self.n_theta


def gabor_filter(theta, sigma, support_radius, dc_correct=True):
    """Single oriented filter at angle ``theta`` (see module docstring)."""
    u1, u2 = _offset_grid(int(support_radius))
    phase = -(u1 * np.sin(theta) - u2 * np.cos(theta)) / sigma
    envelope = np.exp(-(u1**2 + u2**2) / sigma**2)
    filt = envelope * np.exp(1j * phase)
    if dc_correct:
        filt = filt - filt.mean()
    return filt


def gabor_bank(n_theta=16, sigma=2.0, support_radius=None) -> GaborBank:
    if n_theta < 2:
        raise ValueError("n_theta must be >= 2")
    if support_radius is None:
        support_radius = int(np.ceil(3 * sigma))
    thetas = np.arange(n_theta) * np.pi / n_theta
    filters = np.stack([gabor_filter(t, sigma, support_radius) for t in thetas])
    filters.flags.writeable = False
    return GaborBank(n_theta, float(sigma), int(support_radius), filters)


def lift_image(image: ScalarField2D, bank: GaborBank) -> LiftedField3D:
    """Lift an image to the cortical space: O(x, y, k) = <I, psi_k> at each pixel.

    Inner product against the conjugated filter (cross-correlation with
    conj(psi)); the modulus is what downstream operations consume.  The
    image mean is removed first; with zero-DC filters this is a no-op
    analytically but makes constant images produce exact zeros.
    """
    h, w = image.data.shape
    if np.ptp(image.data) == 0.0:  # constant image: exactly zero response
        return LiftedField3D(np.zeros((h, w, bank.n_theta), dtype=np.complex128),
                             spacing=image.spacing)
    img = image.data - image.data.mean()
    out = np.empty((h, w, bank.n_theta), dtype=np.complex128)
    for k in range(bank.n_theta):
        kern = np.conj(bank.filters[k])
        out[:, :, k] = (correlate_reflect(img, kern.real)
                        + 1j * correlate_reflect(img, kern.imag))
    return LiftedField3D(out, spacing=image.spacing)


def argmax_orientation(lifted: LiftedField3D):
    """Per-pixel most responsive orientation and its modulus.

    Ties break toward the smallest bin index.  Returns
    ``(theta_map, modulus_map)`` as ScalarField2D.
    """
    mod = np.abs(lifted.data)
    bins = np.argmax(mod, axis=2)
    modmax = np.take_along_axis(mod, bins[:, :, None], axis=2)[:, :, 0]
    theta = bins * (np.pi / lifted.n_theta)
    sp = lifted.spacing
    return ScalarField2D(theta, spacing=sp), ScalarField2D(modmax, spacing=sp)


def theta_to_bin(theta_map: ScalarField2D, n_theta: int):
    """Recover integer orientation bins from a theta map (exact on bin values)."""
    return np.rint(theta_map.data * n_theta / np.pi).astype(int) % n_theta


@dataclass(frozen=True)
class SupportSet:
    """Lifted points with supra-threshold modulus, in grid scan order."""

    xs: np.ndarray
    ys: np.ndarray
    bins: np.ndarray
    values: np.ndarray
    n_theta: int
    shape: tuple  # (height, width)

    def __len__(self):
        return len(self.xs)

    def pixel_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.ys, self.xs] = True
        return mask


def threshold_support(lifted: LiftedField3D, h) -> SupportSet:
    """All (x, y, theta) triples with |O| >= h."""
    if h < 0:
        raise ValueError("threshold must be >= 0")
    mod = np.abs(lifted.data)
    ys, xs, bins = np.nonzero(mod >= h)
    return SupportSet(xs=xs, ys=ys, bins=bins, values=mod[ys, xs, bins],
                      n_theta=lifted.n_theta,
                      shape=(lifted.height, lifted.width))


@dataclass(frozen=True)
class EdgeList:
    """Binarized oriented edges: pixel, orientation bin, response magnitude."""

    xs: np.ndarray
    ys: np.ndarray
    bins: np.ndarray
    mags: np.ndarray
    n_theta: int
    shape: tuple

    def __len__(self):
        return len(self.xs)

    def to_json_obj(self):
        return [
            {"x": int(x), "y": int(y), "thetaIndex": int(b), "magnitude": float(m)}
            for x, y, b, m in zip(self.xs, self.ys, self.bins, self.mags)
        ]


def nonmax_suppress(lifted: LiftedField3D, theta_map: ScalarField2D,
                    threshold=0.0) -> EdgeList:
    """Thin the orientation response to ridge pixels.

    A pixel survives iff its max modulus strictly exceeds both neighbours
    along the gradient direction (perpendicular to the level line) and
    meets ``threshold``.
    """
    mod = np.abs(lifted.data)
    bins = np.argmax(mod, axis=2)
    m = np.take_along_axis(mod, bins[:, :, None], axis=2)[:, :, 0]
    h, w = m.shape
    phi = theta_map.data + np.pi / 2.0  # gradient direction
    dx = np.rint(np.cos(phi)).astype(int)
    dy = np.rint(np.sin(phi)).astype(int)
    yy, xx = np.mgrid[0:h, 0:w]
    yp = np.clip(yy + dy, 0, h - 1)
    xp = np.clip(xx + dx, 0, w - 1)
    ym = np.clip(yy - dy, 0, h - 1)
    xm = np.clip(xx - dx, 0, w - 1)
    keep = (m > m[yp, xp]) & (m > m[ym, xm]) & (m >= threshold)
    ys, xs = np.nonzero(keep)
    return EdgeList(xs=xs, ys=ys, bins=bins[ys, xs], mags=m[ys, xs],
                    n_theta=lifted.n_theta, shape=(h, w))
