"""Spectral grouping: affinities on the lifted support and perceptual units.

The connectivity kernel restricted to the supra-threshold support defines a
symmetric nonnegative affinity matrix; its leading eigenvectors are the
emergent activity modes.  Each eigenvector is one perceptual unit, its
eigenvalue the unit's saliency, and the most salient unit comes first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import EmptyInput, SolverError
from .filtering import SupportSet
from .grids import LiftedField3D
from .kernels import TRUNCATION_REL, Kernel3D

_PAIR_CHUNK = 2_000_000


@dataclass(frozen=True)
class AffinityMatrix:
    """Sparse symmetric nonnegative affinity over a SupportSet."""

    matrix: sp.csr_matrix
    support: SupportSet

    @property
    def n(self):
        return self.matrix.shape[0]


def assemble_affinity(support: SupportSet, kernel: Kernel3D,
                      truncation=TRUNCATION_REL) -> AffinityMatrix:
    """Pairwise kernel weights on the support, symmetrized entrywise.

    Entry (i, j) is ``(K(i->j) + K(j->i)) / 2``; entries below
    ``truncation * max_weight`` are dropped.  Spatial pruning uses the
    kernel extent, outside which every weight is zero.
    """
    n = len(support)
    if n == 0:
        raise EmptyInput("support set is empty")
    xs = support.xs.astype(float)
    ys = support.ys.astype(float)
    bins = support.bins.astype(int)

    ry, rx = kernel.extent
    reach = float(np.hypot(rx, ry)) + 1.0
    tree = cKDTree(np.column_stack([xs, ys]))
    pairs = tree.query_pairs(reach, output_type="ndarray")

    thresh = truncation * max(kernel.weights.max(), 1e-300)
    rows, cols, vals = [], [], []

    # diagonal: self-affinity at the identity offset
    diag = 0.5 * (kernel.pair_weights(xs, ys, bins, xs, ys, bins) * 2.0)
    keep = diag > thresh
    idx = np.nonzero(keep)[0]
    rows.append(idx)
    cols.append(idx)
    vals.append(diag[keep])

    for lo in range(0, len(pairs), _PAIR_CHUNK):
        chunk = pairs[lo:lo + _PAIR_CHUNK]
        i, j = chunk[:, 0], chunk[:, 1]
        w = 0.5 * (kernel.pair_weights(xs[i], ys[i], bins[i],
                                       xs[j], ys[j], bins[j])
                   + kernel.pair_weights(xs[j], ys[j], bins[j],
                                         xs[i], ys[i], bins[i]))
        keep = w > thresh
        i, j, w = i[keep], j[keep], w[keep]
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([w, w])

    mat = sp.coo_matrix(
        (np.concatenate(vals) if vals else np.zeros(0),
         (np.concatenate(rows) if rows else np.zeros(0, dtype=int),
          np.concatenate(cols) if cols else np.zeros(0, dtype=int))),
        shape=(n, n),
    ).tocsr()
    return AffinityMatrix(matrix=mat, support=support)


def _fix_sign(vec):
    k = int(np.argmax(np.abs(vec)))
    return vec if vec[k] >= 0 else -vec


def leading_eigs(aff: AffinityMatrix, k: int, seed: int = 0):
    """Top-k eigenpairs of the affinity, descending by eigenvalue.

    Deterministic for a fixed seed (seeded Lanczos start vector);
    eigenvector signs are fixed so the largest-magnitude entry is positive.
    Residuals are verified against ``||Mv - lambda v|| <= 1e-6 |lambda| ||v||``.
    """
    m = aff.matrix
    n = m.shape[0]
    if k > n:
        raise ValueError(f"requested {k} eigenpairs from a {n}x{n} matrix")
    rng = np.random.default_rng(seed)
    if k >= n - 1 or n < 5:
        dense = m.toarray()
        w, v = np.linalg.eigh(dense)
        order = np.argsort(w)[::-1][:k]
        pairs = [(float(w[i]), _fix_sign(v[:, i].copy())) for i in order]
    else:
        v0 = rng.standard_normal(n)
        try:
            w, v = eigsh(m, k=k, which="LA", v0=v0)
        except ArpackNoConvergence as exc:
            raise SolverError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(w)[::-1]
        pairs = [(float(w[i]), _fix_sign(v[:, i].copy())) for i in order]
    for lam, vec in pairs:
        resid = np.linalg.norm(m @ vec - lam * vec)
        bound = 1e-6 * max(abs(lam), 1e-300) * np.linalg.norm(vec)
        if resid > bound and abs(lam) > 1e-12 * abs(pairs[0][0]):
            raise SolverError(f"eigen residual {resid:.2e} above bound",
                              residual=resid)
    return pairs


@dataclass(frozen=True)
class PerceptualUnit:
    """One coherent group of lifted points with its saliency."""

    members: np.ndarray       # indices into the SupportSet
    saliency: float
    weights: np.ndarray       # eigenvector values on the members

    def pixel_set(self, support: SupportSet):
        return set(zip(support.xs[self.members].tolist(),
                       support.ys[self.members].tolist()))

    def pixel_mask(self, support: SupportSet):
        mask = np.zeros(support.shape, dtype=bool)
        mask[support.ys[self.members], support.xs[self.members]] = True
        return mask


def extract_units(eigs, support: SupportSet, member_threshold=0.2):
    """Threshold each eigenvector into a crisp unit, ordered by saliency."""
    units = []
    for lam, vec in eigs:
        mag = np.abs(vec)
        top = mag.max()
        members = np.nonzero(mag >= member_threshold * top)[0] if top > 0 \
            else np.arange(len(vec))
        if member_threshold == 0.0:
            members = np.nonzero(mag > 0)[0]
        units.append(PerceptualUnit(members=members, saliency=lam,
                                    weights=vec[members]))
    units.sort(key=lambda u: -u.saliency)
    return units


def group_support(support: SupportSet, kernel: Kernel3D, n_units=4, seed=0,
                  member_threshold=0.2):
    """Affinity -> eigen decomposition -> units, in one call."""
    aff = assemble_affinity(support, kernel)
    k = min(n_units, aff.n)
    eigs = leading_eigs(aff, k, seed=seed)
    return extract_units(eigs, support, member_threshold), aff


def _rotated_slice(kernel: Kernel3D, bp: int, db: int):
    """Kernel slice for source orientation bp, resampled into image offsets.

    Nearest-cell resampling, so the identity (delta) kernel convolves as
    the exact identity at every orientation.
    """
    ry, rx = kernel.extent
    dyg, dxg = np.mgrid[-ry:ry + 1, -rx:rx + 1].astype(float)
    theta = bp * np.pi / kernel.n_theta
    c, s = np.cos(theta), np.sin(theta)
    gx = np.rint(c * dxg + s * dyg).astype(int) + rx
    gy = np.rint(-s * dxg + c * dyg).astype(int) + ry
    ok = (gx >= 0) & (gx <= 2 * rx) & (gy >= 0) & (gy <= 2 * ry)
    gxc = np.clip(gx, 0, 2 * rx)
    gyc = np.clip(gy, 0, 2 * ry)
    return np.where(ok, kernel.weights[gyc, gxc, db], 0.0)


def mean_field_step(activity: LiftedField3D, feedforward: LiftedField3D,
                    kernel: Kernel3D, sigma=None) -> LiftedField3D:
    """One stationary mean-field update a' = sigma(K * ((a + O)/2)).

    ``K *`` is the group convolution with the connectivity kernel
    (zero activity outside the frame); with ``sigma=None`` (identity)
    this is a single linear fixed-point step.
    """
    from scipy.signal import fftconvolve

    if activity.data.shape != feedforward.data.shape:
        raise ValueError("activity and feedforward shapes differ")
    v = 0.5 * (activity.data + feedforward.data)
    h, w, n = v.shape
    out = np.zeros_like(v)
    for bp in range(n):
        if kernel.mode == "per_central_orientation" and bp != kernel.central_bin:
            continue
        acc = np.zeros((h, w), dtype=v.dtype)
        for db in range(kernel.n_theta):
            bq = (bp + db) % kernel.n_theta
            if kernel.mode == "group_stationary":
                wmap = _rotated_slice(kernel, bp, db)
            else:
                wmap = kernel.weights[:, :, bq]
            if not np.any(wmap):
                continue
            # out(x) += sum_d wmap(d) v(x + d): correlation = flipped convolution
            acc += fftconvolve(v[:, :, bq], wmap[::-1, ::-1], mode="same")
        out[:, :, bp] = acc
    if sigma is not None:
        out = sigma(out)
    return LiftedField3D(out, spacing=activity.spacing)
