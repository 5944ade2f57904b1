import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgmsfem.assembly import assemble_global, assemble_loads, assemble_patch, interpolate, scalar_load
from cgmsfem.coeffs import MaterialField
from cgmsfem.mesh import build_fine_mesh, build_mesh_pair


def _random_material(n, seed):
    r = np.random.default_rng(seed)
    return MaterialField(*(np.exp(r.normal(size=(4, n)))))


@pytest.fixture(scope="module")
def mesh():
    return build_fine_mesh(6, 5)


def test_symmetry_and_positivity(mesh):
    b = assemble_global(mesh, _random_material(mesh.n_elements, 0))
    for M in (b.A1, b.A4, b.Mp, b.M1, b.M2):
        assert abs(M - M.T).max() < 1e-13 * abs(M).max()
    assert np.all(np.linalg.eigvalsh(b.Mp.toarray()) > 0)
    assert b.A2.shape == (2 * mesh.n_nodes, mesh.n_nodes)
    assert (b.A3 - b.A2.T).nnz == 0


def _rigid_modes(mesh):
    x, y = mesh.nodes.T
    one, zero = np.ones_like(x), np.zeros_like(x)
    return [np.r_[one, zero], np.r_[zero, one], np.r_[-y, x]]


@given(seed=st.integers(0, 10_000))
def test_kernels_of_stiffness(seed):
    mesh = build_fine_mesh(4, 3)
    b = assemble_global(mesh, _random_material(mesh.n_elements, seed))
    scale = abs(b.A1).max()
    for r in _rigid_modes(mesh):
        assert np.linalg.norm(b.A1 @ r) < 1e-12 * scale * np.linalg.norm(r)
    assert np.linalg.norm(b.A4 @ np.ones(mesh.n_nodes)) < 1e-12 * abs(b.A4).max()


def test_linear_field_energies_match_integrals(mesh):
    lam, mu, kappa, beta = 2.0, 0.7, 3.0, 0.5
    b = assemble_global(mesh, MaterialField.constant(mesh.n_elements, lam, mu, kappa, beta))
    x, y = mesh.nodes.T
    u = np.r_[x, np.zeros_like(x)]
    assert u @ b.A1 @ u == pytest.approx(lam + 2 * mu, rel=1e-12)
    shear = np.r_[y, np.zeros_like(x)]  # eps12 = 1/2, sigma:eps = 2 mu * 2 * 1/4
    assert shear @ b.A1 @ shear == pytest.approx(mu, rel=1e-12)
    assert x @ b.A4 @ x == pytest.approx(kappa, rel=1e-12)
    # coupling: int beta theta div u with theta = 1, div u = 1
    assert u @ b.A2 @ np.ones(mesh.n_nodes) == pytest.approx(beta, rel=1e-12)
    # coupling with theta = y and u = (x, 0): int beta * y = beta / 2
    assert u @ b.A2 @ y == pytest.approx(beta / 2, rel=1e-12)
    assert np.ones(mesh.n_nodes) @ b.Mp @ np.ones(mesh.n_nodes) == pytest.approx(1.0)
    assert np.allclose((b.M1[:mesh.n_nodes, :mesh.n_nodes] - (lam + 2 * mu) * b.Mp).data, 0)
    assert np.allclose((b.M2 - kappa * b.Mp).data, 0)


def test_evolution_matrix_blocks(mesh):
    b = assemble_global(mesh, _random_material(mesh.n_elements, 3))
    A, B = b.evolution_matrices(0.1)
    n = mesh.n_nodes
    A = A.toarray()
    assert np.allclose(A[:2 * n, 2 * n:], -b.A2.toarray())
    assert np.allclose(A[2 * n:, :2 * n], b.A2.T.toarray())
    assert np.allclose(A[2 * n:, 2 * n:], (b.Mp + 0.1 * b.A4).toarray())
    assert abs(B[:2 * n]).max() == 0


def test_patch_blocks_are_restrictions_without_dirichlet():
    pair = build_mesh_pair(8, 8, 2, 2)
    mat = _random_material(pair.fine.n_elements, 4)
    pb = assemble_patch(pair, mat, 4)  # interior vertex: whole domain
    gb = assemble_global(pair.fine, mat, dirichlet_policy=False)
    assert abs(pb.A1 - gb.A1).max() < 1e-14
    assert not pb.dofs.dirichlet.any()


def test_loads_integrate_sources(mesh):
    F, G = assemble_loads(mesh, lambda x, y, t: (np.ones_like(x), 2 * x), lambda x, y, t: x * y + t, t=1.0)
    assert F[:mesh.n_nodes].sum() == pytest.approx(1.0)
    assert F[mesh.n_nodes:].sum() == pytest.approx(1.0)
    assert G.sum() == pytest.approx(1.25)
    # quadratic integrand is integrated exactly against each hat function
    x, y = mesh.nodes.T
    assert scalar_load(mesh, lambda x, y, t: x) @ x == pytest.approx(interpolate(mesh, lambda x, y, t: x) @ (
        assemble_global(mesh, MaterialField.constant(mesh.n_elements)).Mp @ x))


def test_nonpositive_material_rejected(mesh):
    m = MaterialField.constant(mesh.n_elements)
    bad = MaterialField.__new__(MaterialField)
    object.__setattr__(bad, "lam", -m.lam)
    for f in ("mu", "kappa", "beta"):
        object.__setattr__(bad, f, getattr(m, f))
    with pytest.raises(ValueError):
        assemble_global(mesh, bad)
