import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgmsfem.mesh import build_fine_mesh, build_mesh_pair, build_partition_of_unity, whole_boundary


@given(nx=st.integers(1, 12), ny=st.integers(1, 12))
def test_fine_mesh_counts_and_area(nx, ny):
    m = build_fine_mesh(nx, ny)
    assert m.n_nodes == (nx + 1) * (ny + 1)
    assert m.n_elements == 2 * nx * ny
    assert np.all(m.areas() > 0)
    assert m.areas().sum() == pytest.approx(1.0, abs=1e-14)


def test_node_numbering_is_row_major():
    m = build_fine_mesh(4, 3)
    j, i = 2, 3
    assert np.allclose(m.nodes[j * 5 + i], [i / 4, j / 3])


def test_bottom_edge_default_and_whole_boundary():
    m = build_fine_mesh(4, 4)
    assert m.dirichlet.sum() == 5
    assert np.all(m.nodes[m.dirichlet, 1] == 0)
    mb = build_fine_mesh(4, 4, dirichlet=whole_boundary)
    assert mb.dirichlet.sum() == 16


@given(k=st.integers(1, 3), N=st.integers(1, 4))
def test_patches_cover_each_element_by_cell_vertices(k, N):
    pair = build_mesh_pair(k * N, k * N, N, N)
    counts = np.zeros(pair.fine.n_elements, dtype=int)
    for p in pair.coarse.patches:
        counts[p] += 1
    # every fine element lies in the patches of the 4 vertices of its coarse cell
    assert np.all(counts == 4)


def test_nondivisible_meshes_are_rejected():
    with pytest.raises(ValueError):
        build_mesh_pair(10, 10, 3, 3)


@pytest.mark.parametrize("kind", ["bilinear", "msfem-harmonic"])
def test_partition_of_unity(kind, rng):
    pair = build_mesh_pair(12, 12, 3, 3)
    kappa = np.exp(rng.normal(size=pair.fine.n_elements))
    pou = build_partition_of_unity(pair, kind, kappa if kind != "bilinear" else None)
    total = np.asarray(pou.values.sum(axis=1)).ravel()
    assert np.max(np.abs(total - 1)) < 1e-12
    assert pou.values.min() >= -1e-12
    for i in range(pair.coarse.n_vertices):
        outside = np.setdiff1d(np.arange(pair.fine.n_nodes), pair.patch_nodes(i))
        assert np.all(pou.column(i)[outside] == 0)


def test_bilinear_pou_is_one_at_its_vertex():
    pair = build_mesh_pair(8, 8, 2, 2)
    pou = build_partition_of_unity(pair)
    for i, (x, y) in enumerate(pair.coarse.vertices):
        node = int(round(y * 8)) * 9 + int(round(x * 8))
        assert pou.column(i)[node] == pytest.approx(1.0)
