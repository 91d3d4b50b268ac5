"""Programmatic test stimuli: Kanizsa figures and contrast disks.

Kanizsa construction (x right, y down, angles clockwise on screen):
four pacman inducers sit at the corners of a square (or of the same
square rotated 45 degrees for the diamond).  Each pacman is a filled
disk minus a 90-degree mouth wedge opening toward the figure's interior;
the wedge (both straight edges rigidly) is rotated by the misalignment
angle about the pacman center, with the rotation sign alternating around
the figure so no global rotation can re-align the edges.

The ideal illusory contour is the set of straight segments between
facing mouth tips; `inducer_pixels` are interior samples of the straight
mouth edges (ends inset to stay clear of the corner and the arc).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import ScalarField2D


def _rot(v, degrees):
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


@dataclass(frozen=True)
class KanizsaSpec:
    canvas: int = 256
    shape: str = "square"  # "square" | "diamond"
    side: int = 128
    pacman_radius: int = 28
    misalign_degrees: float = 0.0
    background: float = 1.0
    pacman: float = 0.0

    def __post_init__(self):
        if self.side <= 2 * self.pacman_radius:
            raise ValueError("side must exceed twice the pacman radius")
        if not (0.0 <= self.misalign_degrees <= 45.0):
            raise ValueError("misalignment must lie in [0, 45] degrees")
        if self.shape not in ("square", "diamond"):
            raise ValueError(f"unknown shape {self.shape!r}")


@dataclass(frozen=True)
class KanizsaStimulus:
    image: ScalarField2D
    contour: np.ndarray          # (n, 2) float (x, y) samples, ideal contour
    inducer_edges: list          # [((x0, y0), (x1, y1)), ...] drawn mouth edges
    inducer_pixels: np.ndarray   # (m, 2) int pixels on the straight edges
    corners: np.ndarray          # (4, 2) pacman centers

    def contour_json_obj(self):
        return [{"x": float(x), "y": float(y)} for x, y in self.contour]


def gen_kanizsa(spec: KanizsaSpec, edge_inset=2.5) -> KanizsaStimulus:
    n = spec.canvas
    c0 = (n - 1) / 2.0
    half = spec.side / 2.0
    phi = 45.0 if spec.shape == "diamond" else 0.0

    # corners in drawing order TL, TR, BR, BL (before the diamond rotation)
    base = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    corners = np.array([[c0, c0] + _rot(v, phi) for v in base])

    # inward edge directions per corner: along the two adjacent sides
    inward = [
        (np.array([1.0, 0.0]), np.array([0.0, 1.0])),    # TL
        (np.array([-1.0, 0.0]), np.array([0.0, 1.0])),   # TR
        (np.array([-1.0, 0.0]), np.array([0.0, -1.0])),  # BR
        (np.array([1.0, 0.0]), np.array([0.0, -1.0])),   # BL
    ]
    signs = [1.0, -1.0, 1.0, -1.0]  # alternating mouth rotation

    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    img = np.full((n, n), spec.background)
    edges = []
    r = float(spec.pacman_radius)
    for (cx, cy), (ea, eb), sg in zip(corners, inward, signs):
        da = _rot(_rot(ea, phi), sg * spec.misalign_degrees)
        db = _rot(_rot(eb, phi), sg * spec.misalign_degrees)
        ux, uy = xx - cx, yy - cy
        inside = ux**2 + uy**2 <= r**2
        mouth = (ux * da[0] + uy * da[1] >= 0) & (ux * db[0] + uy * db[1] >= 0)
        img[inside & ~mouth] = spec.pacman
        for d in (da, db):
            edges.append(((cx, cy), (cx + r * d[0], cy + r * d[1])))

    # ideal contour: the sides between facing mouth tips
    samples = []
    for i in range(4):
        a = corners[i]
        b = corners[(i + 1) % 4]
        d = (b - a) / np.linalg.norm(b - a)
        for t in np.arange(r, spec.side - r + 1e-9, 1.0):
            samples.append(a + t * d)
    contour = np.array(samples)

    # interior pixel samples of the straight mouth edges
    pix = []
    for (p0, p1) in edges:
        p0 = np.asarray(p0)
        p1 = np.asarray(p1)
        d = (p1 - p0) / np.linalg.norm(p1 - p0)
        for t in np.arange(edge_inset, r - edge_inset + 1e-9, 0.5):
            pix.append(np.rint(p0 + t * d).astype(int))
    inducer_pixels = np.unique(np.array(pix), axis=0)

    return KanizsaStimulus(image=ScalarField2D(img), contour=contour,
                           inducer_edges=edges, inducer_pixels=inducer_pixels,
                           corners=corners)


@dataclass(frozen=True)
class ContrastStimulus:
    image: ScalarField2D
    disk_left: np.ndarray    # bool masks
    disk_right: np.ndarray
    background: np.ndarray


def gen_contrast(canvas=256, disk_gray=0.5, bg_left=0.75, bg_right=0.25,
                 disk_radius=28) -> ContrastStimulus:
    """Two identical-gray disks on a split background (left bright).

    The two disks are exact mirror images about the vertical midline so
    an equal-background control is pixelwise symmetric.
    """
    n = canvas
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    img = np.where(xx < n / 2.0, bg_left, bg_right)
    cy = (n - 1) / 2.0
    cxl = n // 4
    cxr = (n - 1) - cxl
    left = (xx - cxl) ** 2 + (yy - cy) ** 2 <= disk_radius**2
    right = (xx - cxr) ** 2 + (yy - cy) ** 2 <= disk_radius**2
    img[left] = disk_gray
    img[right] = disk_gray
    return ContrastStimulus(image=ScalarField2D(img), disk_left=left,
                            disk_right=right, background=~(left | right))
