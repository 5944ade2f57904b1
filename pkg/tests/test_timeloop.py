import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from cgmsfem.assembly import assemble_global
from cgmsfem.coeffs import MaterialField
from cgmsfem.mesh import build_fine_mesh, whole_boundary
from cgmsfem.spectral import MultiscaleBasis
from cgmsfem.timeloop import (ConstraintError, CoarseStepper, Problem, TimeGrid, discrete_energy,
                              initial_state, run_march)


def _problem(n=6, seed=0, **kw):
    mesh = build_fine_mesh(n, n)
    r = np.random.default_rng(seed)
    mat = MaterialField(*(np.exp(r.normal(size=(4, mesh.n_elements)))))
    return Problem(mesh, assemble_global(mesh, mat), **kw)


def _identity_basis(problem):
    free = np.nonzero(~problem.blocks.dofs.dirichlet)[0]
    n = problem.blocks.dofs.n_dofs
    R = sp.csc_matrix((np.ones(free.size), (free, np.arange(free.size))), shape=(n, free.size))
    return MultiscaleBasis(R, np.zeros((free.size, 2), dtype=int))


def test_time_grid():
    g = TimeGrid.uniform(1.0, 0.02)
    assert g.n_steps == 50
    assert g.times[-1] == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        TimeGrid.uniform(1.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid((0.1, -0.1))


def test_zero_data_gives_zero_solution():
    p = _problem()
    hist = run_march("fine", p, TimeGrid.uniform(0.1, 0.02), store="full")
    assert all(np.all(w == 0) for w in hist.states)


@given(seed=st.integers(0, 1000))
def test_energy_decays_without_sources(seed):
    p = _problem(5, seed, theta0=lambda x, y, t: np.sin(3 * x + 5 * seed) * (1 + y))
    hist = run_march("fine", p, TimeGrid.uniform(0.5, 0.01), store="full")
    E = [discrete_energy(p.blocks, w) for w in hist.states[1:]]
    assert np.all(np.diff(E) <= 1e-12 * E[0])


def test_initial_state_is_in_equilibrium():
    p = _problem(theta0=lambda x, y, t: 1 + x * y, f=lambda x, y, t: (x, -y))
    w = initial_state(p)
    n = p.n_nodes
    F, _ = p.loads(0.0)
    res = p.blocks.A1 @ w[:2 * n] - p.blocks.A2 @ w[2 * n:] - F
    free = ~p.blocks.dofs.dirichlet[:2 * n]
    assert np.linalg.norm(res[free]) < 1e-10 * np.linalg.norm(F)


def test_no_dirichlet_is_rejected():
    mesh = build_fine_mesh(3, 3, dirichlet=lambda x, y: np.zeros_like(x, dtype=bool))
    p = Problem(mesh, assemble_global(mesh, MaterialField.constant(mesh.n_elements)))
    with pytest.raises(ConstraintError):
        initial_state(p)


def test_identity_basis_reproduces_fine_march():
    src = dict(theta0=lambda x, y, t: x * (1 - y), g=lambda x, y, t: 1 + t * x,
               f=lambda x, y, t: (0 * x + 1, y))
    p = _problem(5, 2, **src)
    grid = TimeGrid.uniform(0.2, 0.02)
    ref = run_march("fine", p, grid, store="full")
    ms = run_march("cgmsfem", p, grid, _identity_basis(p), store="full")
    for a, b in zip(ref.states, ms.states):
        assert np.linalg.norm(a - b) <= 1e-10 * max(np.linalg.norm(a), 1.0)


def test_nonhomogeneous_dirichlet_data_is_imposed():
    mesh = build_fine_mesh(4, 4, dirichlet=whole_boundary)
    p = Problem(mesh, assemble_global(mesh, MaterialField.constant(mesh.n_elements)),
                u_D=lambda x, y, t: (t * x, 0 * y), theta_D=lambda x, y, t: 1 + t + 0 * x)
    hist = run_march("fine", p, TimeGrid.uniform(0.1, 0.05), store="final")
    n = mesh.n_nodes
    fixed = mesh.dirichlet
    assert np.allclose(hist.final[2 * n:][fixed], 1.1)
    assert np.allclose(hist.final[:n][fixed], 0.1 * mesh.nodes[fixed, 0])


@pytest.mark.parametrize("store,count", [("final", 1), ("strided", 3), ("full", 11)])
def test_storage_policies(store, count):
    p = _problem(3)
    hist = run_march("fine", p, TimeGrid.uniform(0.1, 0.01), store=store)
    assert len(hist.states) == count
    assert hist.times[-1] == pytest.approx(0.1)


def test_galerkin_identity_and_coarse_rhs():
    p = _problem(4, 5)
    r = np.random.default_rng(0)
    R = sp.csc_matrix(r.normal(size=(3 * p.n_nodes, 7)) * np.tile(~p.mesh.dirichlet, 3)[:, None])
    st_ = CoarseStepper(p, MultiscaleBasis(R, np.zeros((7, 2), dtype=int)), 0.05)
    A, _ = p.blocks.evolution_matrices(0.05)
    v = r.normal(size=7)
    lhs = v @ st_.Ac @ v
    assert abs(lhs - (R @ v) @ (A @ (R @ v))) <= 1e-12 * abs(lhs)


def test_unknown_mode_rejected():
    p = _problem(3)
    with pytest.raises(ValueError):
        run_march("coarse", p, TimeGrid.uniform(0.1, 0.1), basis=_identity_basis(p))
