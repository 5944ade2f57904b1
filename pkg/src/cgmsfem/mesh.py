"""Structured fine/coarse meshes on the unit square, coarse patches and partitions of unity."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class FineMesh:
    nx: int
    ny: int
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tri, 3), counter-clockwise
    dirichlet: np.ndarray  # bool per node

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def h(self):
        return max(1.0 / self.nx, 1.0 / self.ny)

    def areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    def cell_of_element(self):
        """Index (j * nx + i) of the square cell each triangle belongs to."""
        return np.arange(self.n_elements) // 2


@dataclass(frozen=True)
class CoarseMesh:
    Nx: int
    Ny: int
    vertices: np.ndarray  # (N_v, 2)
    patches: tuple  # per vertex: sorted fine-element indices of omega_i
    patch_cells: tuple  # per vertex: coarse cell indices making up omega_i

    @property
    def H(self):
        return max(1.0 / self.Nx, 1.0 / self.Ny)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]


@dataclass(frozen=True)
class MeshPair:
    fine: FineMesh
    coarse: CoarseMesh
    _patch_nodes: dict = field(default_factory=dict, repr=False, compare=False)

    def patch_nodes(self, i):
        """Sorted global node ids of patch ``i``."""
        if i not in self._patch_nodes:
            tri = self.fine.triangles[self.coarse.patches[i]]
            self._patch_nodes[i] = np.unique(tri)
        return self._patch_nodes[i]

    def coarse_cell_elements(self, c):
        """Fine element indices inside coarse cell ``c``."""
        rx = self.fine.nx // self.coarse.Nx
        ry = self.fine.ny // self.coarse.Ny
        I, J = c % self.coarse.Nx, c // self.coarse.Nx
        ii, jj = np.meshgrid(np.arange(I * rx, (I + 1) * rx), np.arange(J * ry, (J + 1) * ry))
        cells = (jj * self.fine.nx + ii).ravel()
        return np.sort(np.concatenate([2 * cells, 2 * cells + 1]))


def bottom_edge(x, y):
    return np.isclose(y, 0.0)


def whole_boundary(x, y):
    return np.isclose(x, 0.0) | np.isclose(x, 1.0) | np.isclose(y, 0.0) | np.isclose(y, 1.0)


def build_fine_mesh(nx, ny, dirichlet=bottom_edge):
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n00 = j * (nx + 1) + i
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    # lower-left to upper-right diagonal; two triangles per cell stored consecutively
    tri = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([n00, n10, n11])
    tri[1::2] = np.column_stack([n00, n11, n01])

    mask = np.asarray(dirichlet(nodes[:, 0], nodes[:, 1]), dtype=bool)
    return FineMesh(nx, ny, nodes, tri, mask)


def build_mesh_pair(nx, ny, Nx, Ny, dirichlet=bottom_edge):
    if min(nx, ny, Nx, Ny) < 1:
        raise ValueError("all cell counts must be >= 1")
    if nx % Nx or ny % Ny:
        raise ValueError(f"fine grid {nx}x{ny} is not a refinement of coarse grid {Nx}x{Ny} "
                         "(nx % Nx and ny % Ny must be 0)")
    fine = build_fine_mesh(nx, ny, dirichlet)
    rx, ry = nx // Nx, ny // Ny

    X, Y = np.meshgrid(np.arange(Nx + 1) / Nx, np.arange(Ny + 1) / Ny)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    # fine elements of each coarse cell
    cell_i = (np.arange(fine.n_elements) // 2) % nx
    cell_j = (np.arange(fine.n_elements) // 2) // nx
    coarse_of_elem = (cell_j // ry) * Nx + cell_i // rx
    order = np.argsort(coarse_of_elem, kind="stable")
    per_cell = np.split(order, np.cumsum(np.bincount(coarse_of_elem, minlength=Nx * Ny))[:-1])

    patches, patch_cells = [], []
    for J in range(Ny + 1):
        for I in range(Nx + 1):
            cells = [b * Nx + a for b in (J - 1, J) for a in (I - 1, I)
                     if 0 <= a < Nx and 0 <= b < Ny]
            patch_cells.append(tuple(cells))
            patches.append(np.sort(np.concatenate([per_cell[c] for c in cells])))
    coarse = CoarseMesh(Nx, Ny, vertices, tuple(patches), tuple(patch_cells))
    return MeshPair(fine, coarse)


@dataclass(frozen=True)
class PartitionOfUnity:
    kind: str
    values: sp.csc_matrix  # (n_fine_nodes, N_v); column i holds chi_i at fine nodes

    def column(self, i):
        return self.values[:, i].toarray().ravel()


def _bilinear_hats(pair):
    fine, coarse = pair.fine, pair.coarse
    x, y = fine.nodes[:, 0], fine.nodes[:, 1]
    rows, cols, vals = [], [], []
    for i, (xi, yi) in enumerate(coarse.vertices):
        hx = np.clip(1.0 - np.abs(x - xi) * coarse.Nx, 0.0, None)
        hy = np.clip(1.0 - np.abs(y - yi) * coarse.Ny, 0.0, None)
        v = hx * hy
        nz = np.nonzero(v > 0)[0]
        rows.append(nz)
        cols.append(np.full(nz.size, i))
        vals.append(v[nz])
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(fine.n_nodes, coarse.n_vertices))


def _harmonic_hats(pair, kappa):
    """Per coarse cell, kappa-harmonic extension of the bilinear hat traces on the cell edges."""
    from .assembly import scalar_stiffness

    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (pair.fine.n_elements,):
        raise ValueError("kappa must hold one value per fine element")
    if np.any(~(kappa > 0)):
        raise ValueError("msfem-harmonic partition of unity needs kappa > 0 everywhere")
    hats = _bilinear_hats(pair).tocsc()
    fine, coarse = pair.fine, pair.coarse
    out = sp.lil_matrix((fine.n_nodes, coarse.n_vertices))
    for c in range(coarse.Nx * coarse.Ny):
        elems = pair.coarse_cell_elements(c)
        nodes = np.unique(fine.triangles[elems])
        K = scalar_stiffness(fine, kappa, elems, nodes)
        xy = fine.nodes[nodes]
        x0, y0 = xy.min(axis=0)
        x1, y1 = xy.max(axis=0)
        on_bdry = (np.isclose(xy[:, 0], x0) | np.isclose(xy[:, 0], x1)
                   | np.isclose(xy[:, 1], y0) | np.isclose(xy[:, 1], y1))
        inner = np.nonzero(~on_bdry)[0]
        bd = np.nonzero(on_bdry)[0]
        Kib = K[inner][:, bd]
        lu = spla.splu(K[inner][:, inner].tocsc()) if inner.size else None
        Ic, Jc = c % coarse.Nx, c // coarse.Nx
        for J in (Jc, Jc + 1):
            for I in (Ic, Ic + 1):
                v = J * (coarse.Nx + 1) + I
                g = hats[nodes, v].toarray().ravel()
                chi = g.copy()
                if lu is not None:
                    chi[inner] = lu.solve(-(Kib @ g[bd]))
                for loc in np.nonzero(np.abs(chi) > 0)[0]:
                    out[nodes[loc], v] = chi[loc]
    return out.tocsc()


def build_partition_of_unity(pair, kind="bilinear", kappa=None):
    """Nodal values of the coarse partition of unity ``chi_i`` on the fine grid.

    ``kind`` is ``"bilinear"`` (coarse Q1 hats) or ``"msfem-harmonic"``, which needs
    the per-element conductivity ``kappa``.
    """
    if kind == "bilinear":
        vals = _bilinear_hats(pair)
    elif kind in ("msfem-harmonic", "msfem"):
        if kappa is None:
            raise ValueError("msfem-harmonic partition of unity requires kappa")
        vals = _harmonic_hats(pair, kappa)
        kind = "msfem-harmonic"
    else:
        raise ValueError(f"unknown partition of unity kind {kind!r}")
    return PartitionOfUnity(kind, vals)
