import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from cgmsfem.assembly import assemble_patch
from cgmsfem.coeffs import MaterialField
from cgmsfem.mesh import build_mesh_pair, build_partition_of_unity
from cgmsfem.spectral import (SpectralConfig, build_gmsfem_baseline, build_multiscale_basis,
                              independent_columns, solve_all_decoupled, solve_all_patches,
                              solve_dense_pencil, solve_patch_spectrum)
from cgmsfem.verification import principal_angles


@pytest.fixture(scope="module")
def pair():
    return build_mesh_pair(8, 8, 2, 2)


def _material(pair, seed=0):
    r = np.random.default_rng(seed)
    return MaterialField(*(np.exp(r.normal(size=(4, pair.fine.n_elements)))))


@pytest.fixture(scope="module")
def blocks(pair):
    return assemble_patch(pair, _material(pair), 0)


@given(g1=st.floats(0.05, 2.0), g2=st.floats(0.05, 2.0))
def test_eigenvalues_depend_only_on_coupling_product(blocks, g1, g2):
    a = solve_patch_spectrum(blocks, SpectralConfig(g1, g2, 4), 10).raw[:10]
    b = solve_patch_spectrum(blocks, SpectralConfig(np.sqrt(g1 * g2), np.sqrt(g1 * g2), 4), 10).raw[:10]
    assert np.allclose(a, b, rtol=1e-8, atol=1e-9 * abs(b).max())


def test_exactly_three_rigid_zero_modes(blocks):
    s = solve_patch_spectrum(blocks, SpectralConfig(0.4, 0.04, 4), 8)
    small = np.abs(s.raw) < 1e-9 * np.abs(s.raw).max()
    assert small.sum() == 3


def test_leading_vectors_span_invariant_subspace(blocks):
    A, M = blocks.spectral_pencil(0.4, 0.04)
    A, M = A.toarray(), M.toarray()
    w, V, _, sym = solve_dense_pencil(A, M, 12)
    assert not sym
    assert np.allclose(V.T @ M @ V, np.eye(12), atol=1e-10)
    # A V = M V T for some 12x12 T: the residual of the M-projection vanishes
    T = V.T @ A @ V
    assert np.linalg.norm(A @ V - M @ V @ T) <= 1e-9 * np.linalg.norm(A @ V)
    assert np.allclose(np.sort(np.linalg.eigvals(T).real), np.sort(w[:12].real), atol=1e-8 * abs(w).max())
    assert np.all(np.diff(w.real) >= -1e-12 * abs(w).max())


def test_symmetric_configuration_uses_real_orthonormal_modes(blocks):
    s = solve_patch_spectrum(blocks, SpectralConfig(0.3, -0.3, 4), 20)
    assert s.symmetric
    assert np.all(s.realness)
    V = s.vectors
    assert np.allclose(V.T @ s.M @ V, np.eye(V.shape[1]), atol=1e-10)


def test_dense_pencil_matches_scipy_eig():
    r = np.random.default_rng(2)
    A = r.normal(size=(12, 12))
    X = r.normal(size=(12, 12))
    M = X @ X.T + 12 * np.eye(12)
    w, *_ = solve_dense_pencil(A, M)
    ref = sla.eigvals(A, M)
    key = lambda z: np.lexsort((np.round(z.imag, 8), np.round(z.real, 8)))
    ref, got = ref[key(ref)], w[key(w)]
    assert np.allclose(got, ref, atol=1e-10)


def test_size_limit(blocks):
    with pytest.raises(ValueError):
        solve_dense_pencil(*blocks.spectral_pencil(1, 1), max_dofs=10)


def test_gamma_zero_equals_decoupled_subspace(pair):
    mat = _material(pair, 3)
    cs = solve_all_patches(pair, mat, SpectralConfig(0.0, 0.0, 6), 12)
    ds = solve_all_decoupled(pair, mat, 12)
    for c, d in zip(cs, ds):
        allv = np.sort(np.concatenate([d.elastic.raw, d.thermal.raw]).real)
        assert np.allclose(np.sort(c.raw.real), allv, atol=1e-9 * allv.max())
        # first 6 coupled modes = union of the elastic and thermal modes below the gap
        ev = np.sort(c.raw.real)
        n_u = int(np.sum(d.elastic.raw.real[:6] <= ev[5] * (1 + 1e-9)))
        if ev[6] - ev[5] > 1e-6 * ev[6]:
            U = d.select(n_u, 6 - n_u)
            assert principal_angles(c.select(6), U, c.M) < 1e-8


def test_independent_columns_drops_duplicates():
    r = np.random.default_rng(0)
    R = r.normal(size=(30, 6))
    R = np.column_stack([R, R[:, 1] + 2 * R[:, 4]])
    assert list(independent_columns(R)) == [0, 1, 2, 3, 4, 5]
    # the last column carrying weight in the dependency is the one removed
    assert list(independent_columns(R[:, [6, 0, 1, 2, 3, 4, 5]])) == [0, 1, 2, 3, 4, 6]
    assert len(independent_columns(r.normal(size=(10, 10)))) == 10


def test_multiscale_basis_is_independent_and_respects_dirichlet(pair):
    mat = _material(pair, 1)
    pou = build_partition_of_unity(pair)
    spectra = solve_all_patches(pair, mat, SpectralConfig(0.4, 0.04, 6), 7)
    basis = build_multiscale_basis(pair, pou, spectra, 6)
    assert basis.gram_rank() == basis.n_columns
    dirichlet = np.tile(pair.fine.dirichlet, 3)
    assert abs(basis.R[dirichlet]).max() == 0
    # the raw set contains the rigid rotation dependency, so some column was removed
    raw = build_multiscale_basis(pair, pou, spectra, 6, independent=False)
    assert raw.n_columns > basis.n_columns


def test_gmsfem_baseline_columns_are_single_field(pair):
    mat = _material(pair, 2)
    pou = build_partition_of_unity(pair)
    b = build_gmsfem_baseline(pair, pou, mat, split=(3, 2), independent=False)
    n = pair.fine.n_nodes
    R = b.R.toarray()
    u_part = np.abs(R[:2 * n]).sum(0) > 0
    t_part = np.abs(R[2 * n:]).sum(0) > 0
    assert not np.any(u_part & t_part)
    with pytest.raises(ValueError):
        build_gmsfem_baseline(pair, pou, mat, split=(0, 0))
