import numpy as np
import pytest

from neurogeo import EmptyInput, LiftedField3D
from neurogeo.filtering import SupportSet
from neurogeo.kernels import Kernel3D, fokker_planck_kernel, symmetrize
from neurogeo.spectral import (
    AffinityMatrix,
    assemble_affinity,
    extract_units,
    leading_eigs,
    mean_field_step,
)
import scipy.sparse as sp


def support_from_points(points, n_theta=8, shape=(32, 32)):
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    bins = np.array([p[2] for p in points])
    return SupportSet(xs=xs, ys=ys, bins=bins,
                      values=np.ones(len(points)), n_theta=n_theta,
                      shape=shape)


def toy_kernel():
    return symmetrize(fokker_planck_kernel(extent=12, n_theta=8, kappa=0.02,
                                           time=8.0))


# --- affinity assembly -------------------------------------------------------

def test_affinity_empty_support():
    sup = support_from_points([])
    with pytest.raises(EmptyInput):
        assemble_affinity(sup, toy_kernel())


def test_affinity_single_point():
    k = toy_kernel()
    sup = support_from_points([(5, 5, 0)])
    aff = assemble_affinity(sup, k)
    assert aff.matrix.shape == (1, 1)
    assert aff.matrix[0, 0] == pytest.approx(k.pair_weight((5, 5, 0), (5, 5, 0)))


def test_affinity_collinear_vs_orthogonal():
    k = toy_kernel()
    # two collinear, co-oriented points along the theta=0 axis
    sup = support_from_points([(5, 10, 0), (10, 10, 0)])
    aff = assemble_affinity(sup, k)
    assert aff.matrix[0, 1] > 0
    # direct kernel lookup oracle
    expect = 0.5 * (k.pair_weight((5, 10, 0), (10, 10, 0))
                    + k.pair_weight((10, 10, 0), (5, 10, 0)))
    assert aff.matrix[0, 1] == pytest.approx(expect)
    # distant orthogonally-oriented points: zero (truncated)
    sup2 = support_from_points([(5, 5, 0), (25, 28, 4)])
    aff2 = assemble_affinity(sup2, k)
    assert aff2.matrix[0, 1] == 0.0


def test_affinity_exact_transpose_symmetry():
    k = toy_kernel()
    rng = np.random.default_rng(0)
    pts = [(int(rng.integers(0, 24)), int(rng.integers(0, 24)),
            int(rng.integers(0, 8))) for _ in range(40)]
    pts = list(dict.fromkeys(pts))
    aff = assemble_affinity(support_from_points(pts), k)
    diff = (aff.matrix - aff.matrix.T).tocoo()
    assert diff.nnz == 0 or np.abs(diff.data).max() == 0.0


# --- eigensolver -------------------------------------------------------------

def _block_affinity():
    # blocks of all-ones, sizes 4 and 2
    m = np.zeros((6, 6))
    m[:4, :4] = 1.0
    m[4:, 4:] = 1.0
    sup = support_from_points([(i, 0, 0) for i in range(6)])
    return AffinityMatrix(matrix=sp.csr_matrix(m), support=sup)


def test_leading_eigs_block_matrix():
    # dense eigensolver oracle on the 6x6 block matrix
    aff = _block_affinity()
    eigs = leading_eigs(aff, 2, seed=1)
    lam1, v1 = eigs[0]
    lam2, v2 = eigs[1]
    assert lam1 == pytest.approx(4.0, rel=1e-9)
    assert lam2 == pytest.approx(2.0, rel=1e-9)
    assert np.allclose(np.abs(v1[:4]), 0.5, atol=1e-8)
    assert np.allclose(v1[4:], 0.0, atol=1e-8)
    assert np.allclose(np.abs(v2[4:]), np.sqrt(0.5), atol=1e-8)
    # sign fix: largest-magnitude entry positive
    assert v1[np.argmax(np.abs(v1))] > 0
    assert v2[np.argmax(np.abs(v2))] > 0


def test_leading_eigs_identity_scaled():
    n = 8
    sup = support_from_points([(i, 0, 0) for i in range(n)])
    aff = AffinityMatrix(matrix=sp.csr_matrix(3.7 * np.eye(n)), support=sup)
    eigs = leading_eigs(aff, 3, seed=0)
    for lam, _ in eigs:
        assert lam == pytest.approx(3.7)


def test_leading_eigs_scaling_property():
    rng = np.random.default_rng(2)
    a = rng.random((12, 12))
    a = 0.5 * (a + a.T)
    sup = support_from_points([(i, 0, 0) for i in range(12)])
    aff1 = AffinityMatrix(matrix=sp.csr_matrix(a), support=sup)
    aff2 = AffinityMatrix(matrix=sp.csr_matrix(5.0 * a), support=sup)
    e1 = leading_eigs(aff1, 3, seed=4)
    e2 = leading_eigs(aff2, 3, seed=4)
    for (l1, v1), (l2, v2) in zip(e1, e2):
        assert l2 == pytest.approx(5.0 * l1, rel=1e-9)
        assert np.allclose(v1, v2, atol=1e-7)


def test_leading_eigs_matches_dense_oracle_larger():
    # eigenvalues within 1e-6 relative of a dense solve for n <= 200
    rng = np.random.default_rng(7)
    n = 120
    a = rng.random((n, n)) * (rng.random((n, n)) < 0.1)
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.2)
    sup = support_from_points([(i % 16, i // 16, 0) for i in range(n)],
                              shape=(16, 16))
    aff = AffinityMatrix(matrix=sp.csr_matrix(a), support=sup)
    got = leading_eigs(aff, 5, seed=3)
    dense = np.sort(np.linalg.eigvalsh(a))[::-1][:5]
    for (lam, _), ref in zip(got, dense):
        assert lam == pytest.approx(ref, rel=1e-6)


def test_leading_eigs_deterministic():
    aff = _block_affinity()
    a = leading_eigs(aff, 2, seed=9)
    b = leading_eigs(aff, 2, seed=9)
    for (l1, v1), (l2, v2) in zip(a, b):
        assert l1 == l2
        assert np.array_equal(v1, v2)


# --- unit extraction ----------------------------------------------------------

def test_extract_units_two_blocks():
    aff = _block_affinity()
    eigs = leading_eigs(aff, 2, seed=1)
    units = extract_units(eigs, aff.support, member_threshold=0.2)
    assert sorted(units[0].members.tolist()) == [0, 1, 2, 3]
    assert sorted(units[1].members.tolist()) == [4, 5]
    assert units[0].saliency >= units[1].saliency


def test_extract_units_zero_threshold():
    # every unit contains all support points with nonzero eigenvector entries
    sup = support_from_points([(i, 0, 0) for i in range(4)])
    eigs = [(2.0, np.array([0.5, 0.5, 0.0, 0.7]))]
    units = extract_units(eigs, sup, member_threshold=0.0)
    assert sorted(units[0].members.tolist()) == [0, 1, 3]


def test_extract_units_scale_invariant_membership():
    aff = _block_affinity()
    scaled = AffinityMatrix(matrix=aff.matrix * 7.0, support=aff.support)
    u1 = extract_units(leading_eigs(aff, 2, seed=1), aff.support)
    u2 = extract_units(leading_eigs(scaled, 2, seed=1), aff.support)
    assert np.array_equal(u1[0].members, u2[0].members)
    assert u2[0].saliency == pytest.approx(7.0 * u1[0].saliency)


# --- mean-field step -----------------------------------------------------------

def _delta_kernel(n_theta=4):
    w = np.zeros((5, 5, n_theta))
    w[2, 2, 0] = 1.0
    return Kernel3D("group_stationary", w, n_theta)


def test_mean_field_identity_kernel_fixed_point():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(10, 10, 4)) + 1j * rng.normal(size=(10, 10, 4))
    a = LiftedField3D(data)
    out = mean_field_step(a, a, _delta_kernel())
    assert np.abs(out.data - a.data).max() < 1e-10


def test_mean_field_zero_inputs():
    z = LiftedField3D(np.zeros((8, 8, 4), dtype=complex))
    out = mean_field_step(z, z, _delta_kernel())
    assert np.abs(out.data).max() == 0.0


def test_mean_field_linear_superposition():
    rng = np.random.default_rng(1)
    k = toy_kernel()
    a1 = LiftedField3D(rng.normal(size=(12, 12, 8)).astype(complex))
    a2 = LiftedField3D(rng.normal(size=(12, 12, 8)).astype(complex))
    z = LiftedField3D(np.zeros((12, 12, 8), dtype=complex))
    s = LiftedField3D(a1.data + a2.data)
    lhs = mean_field_step(s, z, k).data
    rhs = mean_field_step(a1, z, k).data + mean_field_step(a2, z, k).data
    assert np.abs(lhs - rhs).max() < 1e-9
