"""Local coupled spectral problems and the multiscale basis matrix R."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import assemble_patch
from .vtk import export_eigenfunctions  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

MAX_PATCH_DOFS = 10_000


@dataclass(frozen=True)
class SpectralConfig:
    gamma1: float = 0.4
    gamma2: float = 0.04
    L: int = 8
    mode: str = "coupled"  # coupled (CGMsFEM) | decoupled (GMsFEM)
    split: tuple = None  # (L_u, L_theta) for decoupled mode; default (L/2, L/2)

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("basis count L must be >= 1")
        if self.mode not in ("coupled", "decoupled"):
            raise ValueError(f"unknown spectral mode {self.mode!r}")
        if self.mode == "decoupled":
            lu, lt = self.decoupled_split()
            if lu < 0 or lt < 0 or lu + lt != self.L:
                raise ValueError(f"invalid decoupled split {(lu, lt)} for L={self.L}")

    def decoupled_split(self):
        if self.split is not None:
            return tuple(int(s) for s in self.split)
        return self.L - self.L // 2, self.L // 2


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


@dataclass
class PatchSpectrum:
    """Sorted generalized eigensystem of one patch pencil ``A psi = mu M psi``.

    ``raw`` holds all pencil eigenvalues ``mu`` sorted by real part; reported
    values are ``H**2 * mu`` (a ``1/H**2`` factor on the mass side). ``vectors``
    is a real M-orthonormal basis whose first ``L`` columns span the invariant
    subspace of the ``L`` smallest eigenvalues (eigenvectors themselves when the
    pencil is symmetric, ordered Schur vectors otherwise).
    """

    raw: np.ndarray
    vectors: np.ndarray
    M: np.ndarray
    H: float = 1.0
    symmetric: bool = False
    patch_id: int = -1

    @property
    def scaled(self):
        return self.raw * self.H ** 2

    @property
    def realness(self):
        tol = 1e-10 * max(1.0, np.abs(self.raw).max())
        return np.abs(self.raw.imag) <= tol

    def lambda_next(self, L):
        """Reported (H^2-scaled) real part of the (L+1)-th eigenvalue."""
        return float(self.scaled[L].real)

    def select(self, L):
        if L > self.vectors.shape[1]:
            raise ValueError(f"requested {L} modes, only {self.vectors.shape[1]} kept")
        return self.vectors[:, :L]


def _schur_blocks(T):
    """``[(start, size, eigenvalue)]`` for the diagonal blocks of a real Schur form."""
    n = T.shape[0]
    out, k = [], 0
    while k < n:
        if k + 1 < n and T[k + 1, k] != 0.0:
            a, b, c, d = T[k, k], T[k, k + 1], T[k + 1, k], T[k + 1, k + 1]
            re = 0.5 * (a + d)
            im = np.sqrt(max(-(b * c) - 0.25 * (a - d) ** 2, 0.0))
            out.append((k, 2, complex(re, im)))
            k += 2
        else:
            out.append((k, 1, complex(T[k, k], 0.0)))
            k += 1
    return out


def _ordered_schur(C, n_keep):
    """Real Schur form with the ``n_keep`` smallest-real-part eigenvalues leading in ascending order."""
    T, Z = sla.schur(C, output="real")
    blocks = _schur_blocks(T)
    vals = np.array([b[2] for b in blocks])
    order = np.lexsort((np.arange(vals.size), vals.real))
    chosen, count = set(), 0
    for j in order:
        if count >= n_keep:
            break
        chosen.add(j)
        count += blocks[j][1]
    select = np.zeros(T.shape[0], dtype=np.int32)
    for j in chosen:
        s, sz, _ = blocks[j]
        select[s:s + sz] = 1
    T, Z, *_, info = sla.lapack.dtrsen(select, T, Z, job="N")
    if info != 0:
        raise np.linalg.LinAlgError(f"Schur reordering failed (dtrsen info={info})")
    # insertion sort of the leading cluster by real part
    pos = 0
    while pos < count:
        lead = [b for b in _schur_blocks(T) if pos <= b[0] < count]
        best = min(lead, key=lambda b: (b[2].real, b[0]))
        if best[0] != pos:
            T2, Z2, info = sla.lapack.dtrexc(T, Z, best[0] + 1, pos + 1)
            if info == 0:
                T, Z = T2, Z2
            else:
                log.debug("dtrexc could not swap nearly equal eigenvalues; keeping order")
                best = [b for b in _schur_blocks(T) if b[0] == pos][0]
        pos += best[1]
    return T, Z, count


def solve_dense_pencil(A, M, n_keep=None, max_dofs=MAX_PATCH_DOFS):
    """Eigenvalues and a leading M-orthonormal basis of ``A x = mu M x``.

    The pencil is reduced to ``C = L^-1 A L^-T`` with ``M = L L^T``. Returns
    ``(eigenvalues sorted by real part, V, M, symmetric)``.
    """
    A, M = _dense(A), _dense(M)
    n = A.shape[0]
    if n > max_dofs:
        raise ValueError(f"patch has {n} dofs, above the dense limit {max_dofs}")
    try:
        Lc = sla.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("mass matrix is not SPD; check coefficient positivity") from exc
    X = sla.solve_triangular(Lc, A, lower=True)
    C = sla.solve_triangular(Lc, X.T, lower=True).T
    n_keep = n if n_keep is None else min(n_keep, n)
    symmetric = np.linalg.norm(A - A.T) <= 1e-12 * np.linalg.norm(A)
    if symmetric:
        w, Y = sla.eigh(0.5 * (C + C.T))
        order = np.lexsort((np.arange(n), w))
        w = w[order].astype(complex)
        Y = Y[:, order[:n_keep]]
    else:
        T, Y, count = _ordered_schur(C, n_keep)
        w = np.array([x for _, sz, v in _schur_blocks(T) for x in ((v, v.conjugate()) if sz == 2 else (v,))])
        head = w[:count]
        tail = w[count:]
        w = np.concatenate([head, tail[np.lexsort((np.arange(tail.size), tail.real))]])
        Y = Y[:, :n_keep]
    V = sla.solve_triangular(Lc, Y, lower=True, trans="T")
    return w, V, M, symmetric


def solve_patch_spectrum(patch_blocks, config, n_keep=None, H=1.0, patch_id=-1,
                         max_dofs=MAX_PATCH_DOFS):
    A, M = patch_blocks.spectral_pencil(config.gamma1, config.gamma2)
    w, V, Md, sym = solve_dense_pencil(A, M, n_keep, max_dofs)
    spec = PatchSpectrum(w, V, Md, H, sym, patch_id)
    n_sel = V.shape[1]
    if not np.all(spec.realness[:n_sel]):
        log.debug("patch %d: %d complex eigenvalues among the first %d",
                  patch_id, int(np.sum(~spec.realness[:n_sel])), n_sel)
    return spec


def _map_parallel(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def solve_all_patches(pair, material, config, n_keep, workers=1):
    """Coupled spectra for every patch, returned in patch order."""
    H = pair.coarse.H

    def job(i):
        return solve_patch_spectrum(assemble_patch(pair, material, i), config, n_keep, H, i)

    return _map_parallel(job, range(pair.coarse.n_vertices), workers)


@dataclass
class MultiscaleBasis:
    R: sp.csc_matrix  # (3 * n_fine_nodes, n_columns)
    index: np.ndarray  # (n_columns, 2): (patch id, local rank)
    dropped: list = field(default_factory=list)  # (patch id, local rank) removed

    @property
    def n_columns(self):
        return self.R.shape[1]

    def gram_rank(self, rtol=1e-10):
        G = (self.R.T @ self.R).toarray()
        ev = np.linalg.eigvalsh(G)
        return int(np.sum(ev > rtol * ev.max())) if ev.size else 0


def _patch_dofs(pair, i):
    nodes = pair.patch_nodes(i)
    n = pair.fine.n_nodes
    return nodes, np.concatenate([nodes, nodes + n, nodes + 2 * n])


def assemble_basis(pair, pou, local_vectors, dirichlet=None, drop_tol=1e-12):
    """Multiply local vectors by ``chi_i`` (same scalar on all 3 components) and stack into R.

    ``local_vectors[i]`` has shape ``(3 * n_patch_nodes, L_i)``. Rows flagged in
    ``dirichlet`` (bool per fine dof) are zeroed; columns that vanish are dropped.
    """
    n_dofs = 3 * pair.fine.n_nodes
    if len(local_vectors) != pair.coarse.n_vertices:
        raise ValueError("need one set of local vectors per patch")
    if dirichlet is None:
        dirichlet = np.tile(pair.fine.dirichlet, 3)
    rows, cols, vals, index, dropped = [], [], [], [], []
    col = 0
    for i, V in enumerate(local_vectors):
        nodes, dofs = _patch_dofs(pair, i)
        if V.shape[0] != dofs.size:
            raise ValueError(f"patch {i}: vectors have {V.shape[0]} rows, patch has {dofs.size} dofs")
        chi = pou.values[nodes, i].toarray().ravel()
        Phi = V * np.tile(chi, 3)[:, None]
        before = np.linalg.norm(Phi, axis=0)
        Phi[dirichlet[dofs]] = 0.0
        after = np.linalg.norm(Phi, axis=0)
        for l in range(Phi.shape[1]):
            if after[l] <= drop_tol * max(before[l], np.finfo(float).tiny):
                dropped.append((i, l))
                continue
            nz = np.nonzero(Phi[:, l])[0]
            rows.append(dofs[nz])
            cols.append(np.full(nz.size, col))
            vals.append(Phi[nz, l])
            index.append((i, l))
            col += 1
    if dropped:
        log.info("dropped %d vanishing basis columns", len(dropped))
    R = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_dofs, col))
    return MultiscaleBasis(R, np.array(index, dtype=int).reshape(-1, 2), dropped)


def _as_counts(L, n):
    return [int(L)] * n if np.isscalar(L) else [int(x) for x in L]


def build_multiscale_basis(pair, pou, spectra, L, dirichlet=None, independent=True):
    """CGMsFEM basis from per-patch coupled spectra; ``L`` is uniform or per-patch.

    With ``independent`` the columns are reduced to a linearly independent set:
    products of the partition of unity with local rigid motions are globally
    dependent (a global rotation is also a combination of patch translations).
    """
    if len(spectra) != pair.coarse.n_vertices:
        raise ValueError("spectrum/patch count mismatch")
    counts = _as_counts(L, len(spectra))
    local = [s.select(Li) for s, Li in zip(spectra, counts)]
    basis = assemble_basis(pair, pou, local, dirichlet)
    return drop_dependent_columns(basis) if independent else basis


@dataclass
class DecoupledSpectra:
    """Per-patch elasticity (A1, M1) and conduction (A4, M2) spectra of the baseline."""

    elastic: PatchSpectrum
    thermal: PatchSpectrum

    def select(self, L_u, L_theta):
        Vu = self.elastic.select(L_u) if L_u else np.zeros((self.elastic.M.shape[0], 0))
        Vt = self.thermal.select(L_theta) if L_theta else np.zeros((self.thermal.M.shape[0], 0))
        nu, nt = Vu.shape[0], Vt.shape[0]
        out = np.zeros((nu + nt, Vu.shape[1] + Vt.shape[1]))
        out[:nu, :Vu.shape[1]] = Vu
        out[nu:, Vu.shape[1]:] = Vt
        return out


def solve_decoupled_patch(patch_blocks, n_keep, H=1.0, patch_id=-1):
    w, V, M, sym = solve_dense_pencil(patch_blocks.A1, patch_blocks.M1, n_keep)
    el = PatchSpectrum(w, V, M, H, sym, patch_id)
    w, V, M, sym = solve_dense_pencil(patch_blocks.A4, patch_blocks.M2, n_keep)
    th = PatchSpectrum(w, V, M, H, sym, patch_id)
    return DecoupledSpectra(el, th)


def solve_all_decoupled(pair, material, n_keep, workers=1):
    H = pair.coarse.H

    def job(i):
        return solve_decoupled_patch(assemble_patch(pair, material, i), n_keep, H, i)

    return _map_parallel(job, range(pair.coarse.n_vertices), workers)


def build_gmsfem_baseline(pair, pou, material=None, split=(4, 4), spectra=None, dirichlet=None,
                          workers=1, independent=True):
    """Decoupled GMsFEM basis: ``L_u`` elasticity modes with zero theta, ``L_theta`` heat modes with zero u."""
    L_u, L_t = (int(s) for s in split)
    if L_u < 0 or L_t < 0 or L_u + L_t < 1:
        raise ValueError(f"invalid split {split}")
    if spectra is None:
        spectra = solve_all_decoupled(pair, material, max(L_u, L_t) + 1, workers)
    if len(spectra) != pair.coarse.n_vertices:
        raise ValueError("spectrum/patch count mismatch")
    local = [s.select(L_u, L_t) for s in spectra]
    basis = assemble_basis(pair, pou, local, dirichlet)
    return drop_dependent_columns(basis) if independent else basis


def independent_columns(R, rtol=1e-7):
    """Indices of a linearly independent column subset, order preserved.

    Columns are normalized. While the smallest eigenvalue of the Gram matrix
    falls below ``rtol**2`` times the largest (singular values below ``rtol``
    relative), the highest-index column with significant weight in the
    corresponding null vector is removed. Rigid modes produce such
    dependencies spread thinly over many patches, so a column-by-column
    distance test is not reliable here. The Gram matrix is small and sparse,
    which keeps this cheap for tall bases; its eigenvalues resolve singular
    value ratios down to about 1e-8.
    """
    if sp.issparse(R):
        R = R.tocsc()
        norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=0)).ravel())
    else:
        R = np.asarray(R, dtype=float)
        norms = np.linalg.norm(R, axis=0)
    if np.any(norms == 0):
        raise ValueError("basis has zero columns")
    Rn = R @ sp.diags(1.0 / norms) if sp.issparse(R) else R / norms
    G = Rn.T @ Rn
    G = G.toarray() if sp.issparse(G) else np.asarray(G)
    keep = np.arange(G.shape[0])
    while keep.size:
        g, U = np.linalg.eigh(G[np.ix_(keep, keep)])
        if g[0] > rtol ** 2 * g[-1]:
            break
        v = np.abs(U[:, 0])
        keep = np.delete(keep, np.nonzero(v >= 0.1 * v.max())[0].max())
    return keep


def drop_dependent_columns(basis, rtol=1e-7):
    """Basis restricted to a maximal independent column subset, column order preserved."""
    keep = independent_columns(basis.R, rtol)
    gone_mask = np.ones(basis.n_columns, dtype=bool)
    gone_mask[keep] = False
    gone = [tuple(int(v) for v in basis.index[k]) for k in np.nonzero(gone_mask)[0]]
    if gone:
        log.info("dropped %d linearly dependent basis columns", len(gone))
    return MultiscaleBasis(basis.R[:, keep].tocsc(), basis.index[keep], basis.dropped + gone)


def eigenvalue_rows(spectra, count=None):
    """``(patch_id, rank, Re, Im)`` rows of reported (H^2-scaled) eigenvalues."""
    rows = []
    for s in spectra:
        vals = s.scaled if count is None else s.scaled[:count]
        for r, v in enumerate(vals):
            rows.append((s.patch_id, r + 1, float(v.real), float(v.imag)))
    return rows
