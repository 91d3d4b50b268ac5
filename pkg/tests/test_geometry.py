import numpy as np
import pytest
import scipy.linalg as sla

from neurogeo import LiftedField3D, ScalarField2D, VectorField2D
from neurogeo.geometry import (
    apply_X,
    apply_X2D,
    commutator_check,
    laplacian_neumann,
    poisson_solve_neumann,
    screened_directional_solve,
)


def lifted_from_fn(n, n_theta, fn, extent=16.0):
    h = extent / n
    yy, xx = np.mgrid[0:n, 0:n].astype(float) * h
    th = np.arange(n_theta) * np.pi / n_theta
    data = fn(xx[:, :, None], yy[:, :, None], th[None, None, :])
    return LiftedField3D(np.broadcast_to(data, (n, n, n_theta)).astype(complex),
                         spacing=h)


# --- apply_X ---------------------------------------------------------------

def test_apply_X_constant_field():
    f = LiftedField3D(np.full((8, 8, 8), 2.5, dtype=complex))
    for which in ("X1", "X2", "X3"):
        assert np.abs(apply_X(f, which).data).max() == 0.0


def test_apply_X_linear_field():
    # analytic oracle: f = x gives X1 f = cos(theta), X3 f = -sin(theta), X2 f = 0
    f = lifted_from_fn(16, 8, lambda x, y, t: x + 0.0 * t)
    th = f.theta_values
    x1 = apply_X(f, "X1").data[2:-2, 2:-2, :]
    x3 = apply_X(f, "X3").data[2:-2, 2:-2, :]
    x2 = apply_X(f, "X2").data
    for k in range(8):
        assert np.abs(x1[:, :, k] - np.cos(th[k])).max() < 1e-12
        assert np.abs(x3[:, :, k] + np.sin(th[k])).max() < 1e-12
    assert np.abs(x2).max() < 1e-12


def test_apply_X2_theta_field():
    # f = theta on a non-wrapping strip: X2 f = 1 away from the seam
    n_theta = 12
    th = np.arange(n_theta) * np.pi / n_theta
    data = np.broadcast_to(th[None, None, :], (6, 6, n_theta)).astype(complex)
    out = apply_X(LiftedField3D(data), "X2").data
    assert np.abs(out[:, :, 1:-1] - 1.0).max() < 1e-12


def test_apply_X_commutes_with_constant_shift():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(8, 8, 8)).astype(complex)
    f = LiftedField3D(data)
    g = LiftedField3D(data + 5.0)
    for which in ("X1", "X2", "X3"):
        assert np.allclose(apply_X(f, which).data, apply_X(g, which).data,
                           atol=1e-11)


def test_integration_by_parts_interior():
    # <X1 f, g> = -<f, X1 g> exactly for interior-supported fields
    rng = np.random.default_rng(1)
    f = np.zeros((16, 16, 8), dtype=complex)
    g = np.zeros((16, 16, 8), dtype=complex)
    f[5:11, 5:11, :] = rng.normal(size=(6, 6, 8))
    g[5:11, 5:11, :] = rng.normal(size=(6, 6, 8))
    ff, gg = LiftedField3D(f), LiftedField3D(g)
    lhs = np.sum(apply_X(ff, "X1").data * g)
    rhs = -np.sum(f * apply_X(gg, "X1").data)
    assert abs(lhs - rhs) < 1e-10


# --- commutator ------------------------------------------------------------

def test_commutator_constant_zero():
    f = LiftedField3D(np.full((10, 10, 10), 1.3, dtype=complex))
    assert commutator_check(f) == 0.0


def test_commutator_defect_shrinks_under_refinement():
    # two-grid comparison: halving the spacing at least halves the defect
    def defect(n, n_theta):
        return commutator_check(
            lifted_from_fn(n, n_theta, lambda x, y, t: x * np.sin(t)))

    d_coarse = defect(16, 8)
    d_fine = defect(32, 16)
    assert d_fine > 0
    assert d_fine / d_coarse <= 0.6


# --- projected derivatives ---------------------------------------------------

def test_apply_X2D_unit_transport():
    # A = (0,1): X1_A = d/dx, so f = x gives 1
    n = 12
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    f = ScalarField2D(xx)
    a = VectorField2D(np.zeros((n, n)), np.ones((n, n)))
    out = apply_X2D(f, a, "X1")
    assert np.abs(out.data[:, 1:-1] - 1.0).max() < 1e-12
    # X3_A = d/dy on the same direction field
    g = ScalarField2D(yy)
    out3 = apply_X2D(g, a, "X3")
    assert np.abs(out3.data[1:-1, :] - 1.0).max() < 1e-12


def test_apply_X2D_degenerate_zero():
    n = 8
    f = ScalarField2D(np.arange(n * n, dtype=float).reshape(n, n))
    a = VectorField2D(np.zeros((n, n)), np.zeros((n, n)))
    assert np.abs(apply_X2D(f, a).data).max() == 0.0


def test_apply_X2D_constant_field_zero():
    n = 8
    f = ScalarField2D(np.full((n, n), 4.2))
    a = VectorField2D(np.ones((n, n)), np.ones((n, n)))
    assert np.abs(apply_X2D(f, a).data).max() < 1e-12


# --- Poisson ----------------------------------------------------------------

def test_poisson_zero_rhs():
    u = poisson_solve_neumann(ScalarField2D(np.zeros((16, 16))))
    assert np.abs(u.data).max() == 0.0


def test_poisson_manufactured_solution():
    # finite-difference residual oracle at 128^2: Neumann-compatible cosine
    n = 128
    x = np.arange(n) + 0.5
    g = np.cos(np.pi * x / n)[None, :] * np.ones((n, 1))
    f = ScalarField2D(-((np.pi / n) ** 2) * g)
    u = poisson_solve_neumann(f)
    assert np.abs(u.data - (g - g.mean())).max() < 1e-4


def test_poisson_apply_operator_oracle():
    f = np.zeros((32, 32))
    f[16, 16] = 1.0
    f[0, 0] = -1.0
    fld = ScalarField2D(f)
    u = poisson_solve_neumann(fld)
    resid = np.abs(laplacian_neumann(u.data) - (f - f.mean())).max()
    assert resid < 1e-8
    assert abs(u.data.mean()) < 1e-12


def test_poisson_zero_mean_property():
    rng = np.random.default_rng(3)
    for _ in range(5):
        f = ScalarField2D(rng.normal(size=(24, 24)))
        u = poisson_solve_neumann(f)
        assert abs(u.data.mean()) < 1e-10
        resid = np.linalg.norm(laplacian_neumann(u.data) - (f.data - f.data.mean()))
        assert resid <= 1e-8 * np.linalg.norm(f.data)


# --- screened directional solver ---------------------------------------------

def test_screened_zero_rhs_fixed_point():
    z = VectorField2D(np.zeros((12, 12)), np.zeros((12, 12)))
    a = screened_directional_solve(z, z)
    assert np.abs(a.ax).max() == 0.0 and np.abs(a.ay).max() == 0.0


def test_screened_1d_analogue_tridiagonal_oracle():
    # direction (0,1) everywhere makes rows decouple: (w1 d2/dx2 - 1) a = r
    n = 24
    rng = np.random.default_rng(0)
    r_row = rng.normal(size=n)
    rhs = VectorField2D(np.tile(r_row, (n, 1)), np.zeros((n, n)))
    a0 = VectorField2D(np.zeros((n, n)), np.ones((n, n)))
    w1 = 4.0
    a = screened_directional_solve(rhs, a0, w1=w1, w3=0.0,
                                   direction_sigma=0.0, max_outer=1)

    # independent banded-solver oracle on the same zero-flux discretization
    main = np.full(n, -1.0)
    upper = np.zeros(n - 1)
    lower = np.zeros(n - 1)
    for j in range(n - 1):
        main[j] -= w1
        main[j + 1] -= w1
        upper[j] = w1
        lower[j] = w1
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = main
    ab[2, :-1] = lower
    oracle = sla.solve_banded((1, 1), ab, r_row)
    assert np.abs(a.ax[n // 2] - oracle).max() < 1e-6
    assert np.abs(a.ay).max() < 1e-12


def test_screened_first_iterate_linear_in_rhs():
    n = 16
    rng = np.random.default_rng(5)
    rx, ry = rng.normal(size=(n, n)), rng.normal(size=(n, n))
    a0 = VectorField2D(np.ones((n, n)), np.zeros((n, n)))
    one = screened_directional_solve(VectorField2D(rx, ry), a0,
                                     w1=1.0, w3=0.5, direction_sigma=0.0,
                                     max_outer=1)
    two = screened_directional_solve(VectorField2D(2 * rx, 2 * ry), a0,
                                     w1=1.0, w3=0.5, direction_sigma=0.0,
                                     max_outer=1)
    assert np.abs(two.ax - 2 * one.ax).max() < 1e-10
    assert np.abs(two.ay - 2 * one.ay).max() < 1e-10


def test_screened_degenerate_start_returns_negated_rhs():
    # all-zero start: first frozen tensor vanishes, so (0 - I) a = rhs
    n = 10
    rng = np.random.default_rng(9)
    rx = rng.normal(size=(n, n))
    rhs = VectorField2D(rx, np.zeros((n, n)))
    z = VectorField2D(np.zeros((n, n)), np.zeros((n, n)))
    a = screened_directional_solve(rhs, z, w1=1.0, w3=0.0, max_outer=1)
    assert np.abs(a.ax + rx).max() < 1e-10
