"""P1 assembly of the thermoelastic operators on the fine mesh and on patch restrictions.

Dof layout over a node set of size ``n``: ``[u1 (n), u2 (n), theta (n)]``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# local P1 mass pattern: int phi_a phi_b = area / 12 * (1 + delta_ab)
_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def element_gradients(mesh, elems=None):
    """Areas and barycentric gradients ``(n_el, 3, 2)`` of P1 triangles."""
    tri = mesh.triangles if elems is None else mesh.triangles[elems]
    p = mesh.nodes[tri]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    if np.any(det <= 0):
        raise ValueError("mesh has zero-area or inverted elements")
    grads = np.empty(tri.shape + (2,))
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    grads /= det[:, None, None]
    return 0.5 * det, grads


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)


def _local_index(nodes, tri):
    """Map global node ids in ``tri`` to positions in the sorted ``nodes`` array."""
    loc = np.searchsorted(nodes, tri)
    if np.any(nodes[np.minimum(loc, nodes.size - 1)] != tri):
        raise ValueError("element references a node outside the node set")
    return loc


def scalar_stiffness(mesh, coef, elems=None, nodes=None):
    """``int coef grad(phi_a) . grad(phi_b)`` over ``elems``, indexed by ``nodes``."""
    elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems)
    nodes = np.arange(mesh.n_nodes) if nodes is None else np.asarray(nodes)
    area, g = element_gradients(mesh, elems)
    k = np.einsum("e,eai,ebi->eab", coef[elems] * area, g, g)
    loc = _local_index(nodes, mesh.triangles[elems])
    r = np.repeat(loc, 3, axis=1)
    c = np.tile(loc, (1, 3))
    return _coo(r, c, k, (nodes.size, nodes.size))


def scalar_mass(mesh, coef, elems=None, nodes=None):
    elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems)
    nodes = np.arange(mesh.n_nodes) if nodes is None else np.asarray(nodes)
    area = mesh.areas()[elems]
    m = (coef[elems] * area)[:, None, None] * _MASS
    loc = _local_index(nodes, mesh.triangles[elems])
    r = np.repeat(loc, 3, axis=1)
    c = np.tile(loc, (1, 3))
    return _coo(r, c, m, (nodes.size, nodes.size))


def elasticity_stiffness(mesh, lam, mu, elems=None, nodes=None):
    """``a(u, v) = int 2 mu eps(u):eps(v) + lam div u div v`` in [u1; u2] block layout."""
    elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems)
    nodes = np.arange(mesh.n_nodes) if nodes is None else np.asarray(nodes)
    n = nodes.size
    area, g = element_gradients(mesh, elems)
    la = lam[elems] * area
    ma = mu[elems] * area
    gx, gy = g[..., 0], g[..., 1]
    outer = lambda p, q: p[:, :, None] * q[:, None, :]
    # 2 mu eps:eps = mu (2 ux vx + 2 uy vy + (uy + vx)(...)) written per component pair
    k11 = (la + 2 * ma)[:, None, None] * outer(gx, gx) + ma[:, None, None] * outer(gy, gy)
    k22 = (la + 2 * ma)[:, None, None] * outer(gy, gy) + ma[:, None, None] * outer(gx, gx)
    k12 = la[:, None, None] * outer(gx, gy) + ma[:, None, None] * outer(gy, gx)
    loc = _local_index(nodes, mesh.triangles[elems])
    r = np.repeat(loc, 3, axis=1)
    c = np.tile(loc, (1, 3))
    rows = np.concatenate([r, r + n, r, c + n])
    cols = np.concatenate([c, c + n, c + n, r])
    vals = np.concatenate([k11, k22, k12, k12])
    return _coo(rows, cols, vals, (2 * n, 2 * n))


def coupling_matrix(mesh, beta, elems=None, nodes=None):
    """``A2[j_u, j_t] = b(phi_u, phi_t) = int beta phi_t div(phi_u)``, shape ``(2n, n)``."""
    elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems)
    nodes = np.arange(mesh.n_nodes) if nodes is None else np.asarray(nodes)
    n = nodes.size
    area, g = element_gradients(mesh, elems)
    w = (beta[elems] * area / 3.0)[:, None, None]
    bx = w * np.repeat(g[..., 0][:, :, None], 3, axis=2)
    by = w * np.repeat(g[..., 1][:, :, None], 3, axis=2)
    loc = _local_index(nodes, mesh.triangles[elems])
    r = np.repeat(loc, 3, axis=1)
    c = np.tile(loc, (1, 3))
    rows = np.concatenate([r, r + n])
    cols = np.concatenate([c, c])
    return _coo(rows, cols, np.concatenate([bx, by]), (2 * n, n))


@dataclass(frozen=True)
class DofMap:
    n_nodes: int
    nodes: np.ndarray  # global node ids carried by this dof set
    dirichlet: np.ndarray  # bool per dof (3 * n_nodes)

    @property
    def n_dofs(self):
        return 3 * self.n_nodes

    @property
    def free(self):
        return np.nonzero(~self.dirichlet)[0]

    @property
    def fixed(self):
        return np.nonzero(self.dirichlet)[0]

    def u_slice(self):
        return slice(0, 2 * self.n_nodes)

    def theta_slice(self):
        return slice(2 * self.n_nodes, 3 * self.n_nodes)


@dataclass(frozen=True)
class OperatorBlocks:
    A1: sp.csr_matrix  # elasticity stiffness (2n, 2n)
    A2: sp.csr_matrix  # coupling (2n, n); the theta-row block is A2.T
    A4: sp.csr_matrix  # conduction stiffness (n, n)
    Mp: sp.csr_matrix  # plain theta mass (n, n)
    M1: sp.csr_matrix  # (lam + 2 mu)-weighted mass on u (2n, 2n)
    M2: sp.csr_matrix  # kappa-weighted mass on theta (n, n)
    dofs: DofMap

    @property
    def A3(self):
        return self.A2.T

    def energy_operator(self):
        """Block diag(A1, A4) used by the energy norms."""
        return sp.block_diag([self.A1, self.A4], format="csr")

    def evolution_matrices(self, tau):
        """``(A^n, B)`` of the backward-Euler step with the -b momentum convention."""
        A = sp.bmat([[self.A1, -self.A2], [self.A2.T, self.Mp + tau * self.A4]], format="csc")
        n = self.dofs.n_nodes
        Z = sp.csr_matrix((2 * n, 3 * n))
        B = sp.vstack([Z, sp.hstack([self.A2.T, self.Mp])], format="csr")
        return A, B

    def spectral_pencil(self, gamma1, gamma2):
        A = sp.bmat([[self.A1, -gamma1 * self.A2], [gamma2 * self.A2.T, self.A4]], format="csr")
        M = sp.block_diag([self.M1, self.M2], format="csr")
        return A, M


def _check_material(material):
    for name in ("lam", "mu", "kappa", "beta"):
        if np.any(getattr(material, name) <= 0):
            raise ValueError(f"non-positive coefficient {name}")


def _blocks(mesh, material, elems, nodes, dirichlet):
    lm = material.lam + 2 * material.mu
    ones = np.ones(mesh.n_elements)
    M1s = scalar_mass(mesh, lm, elems, nodes)
    return OperatorBlocks(
        A1=elasticity_stiffness(mesh, material.lam, material.mu, elems, nodes),
        A2=coupling_matrix(mesh, material.beta, elems, nodes),
        A4=scalar_stiffness(mesh, material.kappa, elems, nodes),
        Mp=scalar_mass(mesh, ones, elems, nodes),
        M1=sp.block_diag([M1s, M1s], format="csr"),
        M2=scalar_mass(mesh, material.kappa, elems, nodes),
        dofs=DofMap(nodes.size, nodes, dirichlet),
    )


def assemble_global(mesh, material, dirichlet_policy=None):
    """Global blocks over all fine nodes.

    ``dirichlet_policy`` is a node predicate ``(x, y) -> bool`` or ``None`` for the
    mesh's own Dirichlet tags; ``False`` disables Dirichlet dofs altogether. The
    Dirichlet flag applies to all three components at a node.
    """
    _check_material(material)
    nodes = np.arange(mesh.n_nodes)
    if dirichlet_policy is None:
        mask = mesh.dirichlet
    elif dirichlet_policy is False:
        mask = np.zeros(mesh.n_nodes, dtype=bool)
    else:
        mask = np.asarray(dirichlet_policy(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=bool)
    return _blocks(mesh, material, None, nodes, np.tile(mask, 3))


def assemble_patch(pair, material, patch_id):
    """Pure-Neumann blocks over the nodes of patch ``patch_id``."""
    _check_material(material)
    elems = pair.coarse.patches[patch_id]
    if elems.size == 0:
        raise ValueError(f"patch {patch_id} is empty")
    nodes = pair.patch_nodes(patch_id)
    return _blocks(pair.fine, material, elems, nodes, np.zeros(3 * nodes.size, dtype=bool))


def _edge_midpoint_rule(mesh, fun, t):
    """Values of ``fun`` at the 3 edge midpoints of every element, plus areas."""
    p = mesh.nodes[mesh.triangles]
    mids = np.stack([(p[:, 0] + p[:, 1]) / 2, (p[:, 1] + p[:, 2]) / 2, (p[:, 2] + p[:, 0]) / 2], axis=1)
    vals = np.asarray(fun(mids[..., 0], mids[..., 1], t), dtype=float)
    return vals, mesh.areas()


# phi_a at midpoints of edges (01, 12, 20)
_PHI_AT_MID = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])  # [a, edge]


def scalar_load(mesh, g, t=0.0):
    vals, area = _edge_midpoint_rule(mesh, g, t)
    vals = np.broadcast_to(vals, area.shape + (3,))
    if not np.all(np.isfinite(vals)):
        raise ValueError("source returned non-finite values")
    loc = (area / 3.0)[:, None] * (vals @ _PHI_AT_MID.T)
    return np.bincount(mesh.triangles.ravel(), loc.ravel(), minlength=mesh.n_nodes)


def assemble_loads(mesh, f, g, t=0.0):
    """``F`` (length 2n, [x; y]) for body force ``f(x, y, t) -> (fx, fy)`` and ``G`` for ``g``."""
    fx = scalar_load(mesh, lambda x, y, s: np.asarray(f(x, y, s))[0] * np.ones_like(x), t)
    fy = scalar_load(mesh, lambda x, y, s: np.asarray(f(x, y, s))[1] * np.ones_like(x), t)
    G = scalar_load(mesh, lambda x, y, s: g(x, y, s) * np.ones_like(x), t)
    return np.concatenate([fx, fy]), G


def interpolate(mesh, fun, t=0.0):
    return np.asarray(fun(mesh.nodes[:, 0], mesh.nodes[:, 1], t), dtype=float) * np.ones(mesh.n_nodes)
