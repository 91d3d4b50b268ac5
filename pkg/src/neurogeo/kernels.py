"""Connectivity kernels on R^2 x S^1.

The oriented connectivity kernel is the fundamental solution of the
advection-diffusion operator (transport along X1, diffusion in theta),
realized as a time-integrated explicit evolution of a discrete delta:

    du/dt = -X1 u + kappa * X2^2 u

with flux-form upwind advection (mass-conserving, reflective walls) and
centered periodic theta-diffusion.  Orientations are identified mod pi, so
the evolution is run in both +-X1 directions and averaged, making the raw
kernel fore-aft symmetric; `symmetrize` additionally enforces the group
symmetry K(p, q) = K(q, p).

Kernel grids are indexed ``weights[dy + ry, dx + rx, dtheta_bin]`` in the
frame of the source point; pair evaluation rotates the spatial offset by
the source orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, StabilityError
from .filtering import theta_to_bin
from .grids import ScalarField2D

TRUNCATION_REL = 1e-6


@dataclass(frozen=True)
class Kernel2D:
    """Raw 2D stencil of weights over (dx, dy) offsets.

    ``weights[dy + ry, dx + rx]``; the LGN log kernel stores negative
    values and is exempt from the nonnegativity rule.
    """

    weights: np.ndarray
    kind: str = "stencil"

    @property
    def extent(self):
        return (self.weights.shape[0] // 2, self.weights.shape[1] // 2)


@dataclass(frozen=True)
class Kernel3D:
    """Connectivity weights on R^2 x S^1 offsets.

    mode "group_stationary": weights on group offsets, theta periodic.
    mode "per_central_orientation": weights for pairs whose central point
    has orientation bin ``central_bin``; spatial offsets are unrotated.
    """

    mode: str
    weights: np.ndarray  # (2ry+1, 2rx+1, n_theta)
    n_theta: int
    symmetrized: bool = False
    base_weights: np.ndarray | None = None  # pre-symmetrization grid
    central_bin: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def extent(self):
        return (self.weights.shape[0] // 2, self.weights.shape[1] // 2)

    # -- evaluation -----------------------------------------------------

    def _sample_grid(self, grid, dx, dy, dbin):
        """Bilinear sample of a kernel grid at float offsets, 0 outside."""
        ry, rx = grid.shape[0] // 2, grid.shape[1] // 2
        gx = np.asarray(dx, dtype=float) + rx
        gy = np.asarray(dy, dtype=float) + ry
        dbin = np.asarray(dbin, dtype=int) % self.n_theta
        x0 = np.floor(gx).astype(int)
        y0 = np.floor(gy).astype(int)
        fx = gx - x0
        fy = gy - y0
        out = np.zeros(np.broadcast(gx, gy).shape, dtype=float)
        h, w = grid.shape[:2]
        for (oy, ox, wgt) in [
            (0, 0, (1 - fy) * (1 - fx)),
            (0, 1, (1 - fy) * fx),
            (1, 0, fy * (1 - fx)),
            (1, 1, fy * fx),
        ]:
            yy = y0 + oy
            xx = x0 + ox
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            yc = np.clip(yy, 0, h - 1)
            xc = np.clip(xx, 0, w - 1)
            out += np.where(ok, grid[yc, xc, dbin] * wgt, 0.0)
        return out

    def _directed(self, grid, xp, yp, bp, xq, yq, bq):
        """Weight of the directed offset p -> q against a given grid."""
        if self.mode == "per_central_orientation":
            dx = np.rint(np.asarray(xq) - np.asarray(xp)).astype(int)
            dy = np.rint(np.asarray(yq) - np.asarray(yp)).astype(int)
            ry, rx = self.extent
            inside = ((np.abs(dx) <= rx) & (np.abs(dy) <= ry)
                      & (np.asarray(bp) % self.n_theta == self.central_bin))
            dxc = np.clip(dx, -rx, rx)
            dyc = np.clip(dy, -ry, ry)
            vals = grid[dyc + ry, dxc + rx, np.asarray(bq) % self.n_theta]
            return np.where(inside, vals, 0.0)
        dbin = (np.asarray(bq) - np.asarray(bp)) % self.n_theta
        theta = np.asarray(bp) * (np.pi / self.n_theta)
        c, s = np.cos(theta), np.sin(theta)
        dx = np.asarray(xq, dtype=float) - np.asarray(xp, dtype=float)
        dy = np.asarray(yq, dtype=float) - np.asarray(yp, dtype=float)
        rot_x = c * dx + s * dy
        rot_y = -s * dx + c * dy
        return self._sample_grid(grid, rot_x, rot_y, dbin)

    def pair_weight(self, p, q):
        """Connectivity weight between two lifted points (x, y, theta_bin).

        For a symmetrized kernel this evaluates Gamma(p->q) + Gamma(q->p)
        on the pre-symmetrization grid, which makes
        ``pair_weight(p, q) == pair_weight(q, p)`` exact.
        """
        return float(self.pair_weights(
            np.array([p[0]]), np.array([p[1]]), np.array([p[2]]),
            np.array([q[0]]), np.array([q[1]]), np.array([q[2]]))[0])

    def pair_weights(self, xp, yp, bp, xq, yq, bq):
        if self.symmetrized and self.base_weights is not None:
            return (self._directed(self.base_weights, xp, yp, bp, xq, yq, bq)
                    + self._directed(self.base_weights, xq, yq, bq, xp, yp, bp))
        return self._directed(self.weights, xp, yp, bp, xq, yq, bq)


def lgn_kernel(extent) -> Kernel2D:
    """Isotropic long-range kernel log(dx^2 + dy^2).

    The origin singularity is replaced by the value at radius 1/2 pixel.
    Weights are signed; this kernel is a raw stencil.
    """
    if extent < 1:
        raise ValueError("extent must be >= 1")
    r = int(extent)
    dx = np.arange(-r, r + 1, dtype=float)
    xx, yy = np.meshgrid(dx, dx, indexing="xy")
    r2 = xx**2 + yy**2
    r2[r, r] = 0.25
    return Kernel2D(np.log(r2), kind="lgn_log")


def group_inverse(dx, dy, dbin, n_theta):
    """Inverse of a group offset, orientations mod pi."""
    theta = dbin * (np.pi / n_theta)
    c, s = np.cos(theta), np.sin(theta)
    ix = -(c * dx + s * dy)
    iy = -(-s * dx + c * dy)
    return ix, iy, (-dbin) % n_theta


def _advect_upwind(u, vx, vy, dt, h):
    """One flux-form upwind step per theta slice; walls carry zero flux."""
    out = u.copy()
    # x-direction: vx is constant per slice
    fxp = np.maximum(vx, 0.0)[None, None, :]
    fxm = np.minimum(vx, 0.0)[None, None, :]
    flux = fxp * u[:, :-1, :] + fxm * u[:, 1:, :]  # face (j, j+1)
    out[:, :-1, :] -= dt / h * flux
    out[:, 1:, :] += dt / h * flux
    fyp = np.maximum(vy, 0.0)[None, None, :]
    fym = np.minimum(vy, 0.0)[None, None, :]
    flux = fyp * u[:-1, :, :] + fym * u[1:, :, :]
    out[:-1, :, :] -= dt / h * flux
    out[1:, :, :] += dt / h * flux
    return out


def fokker_planck_evolve(extent, n_theta, kappa, time, n_steps=None,
                         h=1.0, cfl=0.8, record_mass=True):
    """Evolve a delta at (0, 0, theta=0) along +X1 with theta diffusion.

    Returns ``(snapshots_sum, final, masses)``: the time-integral of the
    evolution (including t=0), the final snapshot, and per-step masses.
    """
    ry = rx = int(extent)
    theta = np.arange(n_theta) * np.pi / n_theta
    vx, vy = np.cos(theta), np.sin(theta)
    dtheta = np.pi / n_theta
    if n_steps is None:
        lim_adv = h / float(np.max(np.abs(vx) + np.abs(vy)))
        lim_dif = 0.5 * dtheta**2 / kappa if kappa > 0 else np.inf
        dt = cfl * min(lim_adv, lim_dif)
        n_steps = max(int(np.ceil(time / dt)), 1) if time > 0 else 0
    dt = time / n_steps if n_steps else 0.0
    if n_steps:
        if dt * float(np.max(np.abs(vx) + np.abs(vy))) / h > 1.0 + 1e-12:
            raise StabilityError(f"advection CFL violated: dt={dt:.4g}")
        if kappa > 0 and kappa * dt / dtheta**2 > 0.5 + 1e-12:
            raise StabilityError(f"theta-diffusion CFL violated: dt={dt:.4g}")
    u = np.zeros((2 * ry + 1, 2 * rx + 1, n_theta))
    u[ry, rx, 0] = 1.0
    total = u * (dt if n_steps else 1.0)
    masses = []
    mu = kappa * dt / dtheta**2
    for _ in range(n_steps):
        u = _advect_upwind(u, vx, vy, dt, h)
        if kappa > 0:
            u = u + mu * (np.roll(u, 1, axis=2) - 2.0 * u + np.roll(u, -1, axis=2))
        if record_mass:
            masses.append(float(u.sum()))
        total += u * dt
    return total, u, masses


def fokker_planck_kernel(extent, n_theta, kappa, time, n_steps=None,
                         h=1.0, cfl=0.8) -> Kernel3D:
    """Time-integrated transport-diffusion kernel, fore-aft averaged.

    The -X1 evolution is the point reflection of the +X1 one, so only one
    evolution is run.  Weights are max-normalized; per-step masses are
    kept in ``meta["massHistory"]``.
    """
    total, _, masses = fokker_planck_evolve(extent, n_theta, kappa, time,
                                            n_steps, h, cfl)
    grid = 0.5 * (total + total[::-1, ::-1, :])
    m = grid.max()
    if m > 0:
        grid = grid / m
    grid.flags.writeable = False
    return Kernel3D(mode="group_stationary", weights=grid, n_theta=n_theta,
                    meta={"kappa": kappa, "T": time, "massHistory": masses})


def symmetrize(kernel: Kernel3D) -> Kernel3D:
    """Group-symmetrized kernel K(g) = Gamma(g) + Gamma(g^-1).

    The stored grid samples the sum (bilinear for off-grid inverses); pair
    evaluation keeps the pre-symmetrization grid so that
    ``pair_weight(p, q) == pair_weight(q, p)`` holds exactly.  No
    renormalization: symmetrizing twice doubles the weights.

    With orientations mod pi the spatial part of a group inverse is only
    defined up to sign; fore-aft symmetric inputs (as produced by
    `fokker_planck_kernel`) evaluate both signs identically.
    """
    if kernel.mode != "group_stationary":
        raise ValueError("symmetrize requires a group-stationary kernel")
    base = kernel.base_weights if kernel.symmetrized else kernel.weights
    if kernel.symmetrized:
        # symmetrize(symmetrize(G)) = 2 * symmetrize(G)
        grid = 2.0 * kernel.weights
        base = 2.0 * np.asarray(base)
        grid.flags.writeable = False
        base.flags.writeable = False
        return Kernel3D(mode=kernel.mode, weights=grid, n_theta=kernel.n_theta,
                        symmetrized=True, base_weights=base,
                        meta=dict(kernel.meta))
    ry, rx = kernel.extent
    n = kernel.n_theta
    dy, dx, db = np.meshgrid(np.arange(-ry, ry + 1), np.arange(-rx, rx + 1),
                             np.arange(n), indexing="ij")
    ix, iy, ib = group_inverse(dx.astype(float), dy.astype(float), db, n)
    inv_vals = kernel._sample_grid(base, ix, iy, ib)
    grid = base + inv_vals
    grid.flags.writeable = False
    return Kernel3D(mode=kernel.mode, weights=grid, n_theta=n,
                    symmetrized=True, base_weights=base,
                    meta=dict(kernel.meta))


def project_max_theta(kernel: Kernel3D) -> Kernel2D:
    """Pointwise max over the orientation axis (association-field view)."""
    return Kernel2D(kernel.weights.max(axis=2), kind="max_theta")


@dataclass(frozen=True)
class ProjectedKernel:
    """Kernel restricted to image-selected orientations (lazy pairwise)."""

    kernel: Kernel3D
    bins: np.ndarray  # per-pixel orientation bin

    def evaluate(self, p, q):
        """Weight between pixels p = (x, y) and q = (x, y)."""
        bp = self.bins[p[1], p[0]]
        bq = self.bins[q[1], q[0]]
        return self.kernel.pair_weight((p[0], p[1], bp), (q[0], q[1], bq))


def project_kernel(kernel: Kernel3D, theta_map: ScalarField2D) -> ProjectedKernel:
    """Restrict a kernel to the per-pixel argmax orientations."""
    bins = theta_to_bin(theta_map, kernel.n_theta)
    return ProjectedKernel(kernel=kernel, bins=bins)


def histogram_to_kernel(hist, central_bin) -> Kernel3D:
    """Per-central-orientation kernel from one row of a 4D co-occurrence
    histogram; max-normalized, nonnegative."""
    n_theta = hist.n_theta
    if not (0 <= central_bin < n_theta):
        raise ValueError(f"central bin {central_bin} out of range")
    row = np.asarray(hist.counts[central_bin], dtype=float)  # (dx, dy, theta_p)
    m = row.max()
    if m <= 0:
        raise DataError(f"histogram row {central_bin} is all zeros")
    grid = np.ascontiguousarray(row.transpose(1, 0, 2)) / m  # -> (dy, dx, theta_p)
    grid.flags.writeable = False
    return Kernel3D(mode="per_central_orientation", weights=grid,
                    n_theta=n_theta, central_bin=int(central_bin),
                    meta={"centralBin": int(central_bin)})
