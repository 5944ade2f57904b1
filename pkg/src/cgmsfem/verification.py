"""Verification suites: manufactured solutions, structural invariants and the interpolation bound.

Each suite returns a list of :class:`Check` records so the CLI, the test suite
and the scripts share one implementation.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import sympy

from .assembly import assemble_global, assemble_patch
from .coeffs import MaterialField
from .diagnostics import interpolation_check
from .mesh import build_mesh_pair, build_partition_of_unity, whole_boundary
from .spectral import SpectralConfig, build_gmsfem_baseline, build_multiscale_basis, solve_all_decoupled, \
    solve_all_patches, solve_decoupled_patch, solve_dense_pencil, solve_patch_spectrum
from .timeloop import CoarseStepper, Problem, TimeGrid, discrete_energy, initial_state, run_march


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# ---------------------------------------------------------------- manufactured solutions

def manufactured_fields(u1, u2, theta, lam=1.0, mu=1.0, kappa=1.0, beta=1.0):
    """Sources ``f``, ``g`` for exact fields given as sympy expressions in ``x, y, t``.

    Strong form: ``-div(sigma(u) - beta theta I) = f`` and
    ``theta_t - div(kappa grad theta) + beta div u_t = g``.
    Returns numpy callables ``(u, theta, f, g)`` with signature ``(x, y, t)``.
    """
    x, y, t = sympy.symbols("x y t")
    div_u = sympy.diff(u1, x) + sympy.diff(u2, y)
    e11, e22 = sympy.diff(u1, x), sympy.diff(u2, y)
    e12 = (sympy.diff(u1, y) + sympy.diff(u2, x)) / 2
    s11 = 2 * mu * e11 + lam * div_u - beta * theta
    s22 = 2 * mu * e22 + lam * div_u - beta * theta
    s12 = 2 * mu * e12
    fx = -(sympy.diff(s11, x) + sympy.diff(s12, y))
    fy = -(sympy.diff(s12, x) + sympy.diff(s22, y))
    g = sympy.diff(theta, t) - kappa * (sympy.diff(theta, x, 2) + sympy.diff(theta, y, 2)) \
        + beta * sympy.diff(div_u, t)

    def vec(e):
        fn = sympy.lambdify((x, y, t), e, "numpy")
        return lambda X, Y, T: np.asarray(fn(X, Y, T), dtype=float) * np.ones_like(X, dtype=float)

    fxn, fyn, u1n, u2n = vec(fx), vec(fy), vec(u1), vec(u2)
    return (lambda X, Y, T: (u1n(X, Y, T), u2n(X, Y, T)), vec(theta),
            lambda X, Y, T: (fxn(X, Y, T), fyn(X, Y, T)), vec(g))


def _l2_midpoint(mesh, wh, exact):
    """L2 error of the P1 field ``wh`` against ``exact(x, y)`` by the edge-midpoint rule."""
    p = mesh.nodes[mesh.triangles]
    tri = mesh.triangles
    area = mesh.areas()
    err = 0.0
    for a, b in ((0, 1), (1, 2), (2, 0)):
        mid = 0.5 * (p[:, a] + p[:, b])
        vh = 0.5 * (wh[tri[:, a]] + wh[tri[:, b]])
        err += np.sum(area / 3.0 * (vh - exact(mid[:, 0], mid[:, 1])) ** 2)
    return np.sqrt(err)


def manufactured_errors(n, tau, T, fields, material=None):
    """Final-time L2 errors ``(u1, u2, theta)`` of the fine march on an ``n x n`` mesh."""
    u, theta, f, g = fields
    pair = build_mesh_pair(n, n, 1, 1, dirichlet=whole_boundary)
    mesh = pair.fine
    material = material or MaterialField.constant(mesh.n_elements)
    blocks = assemble_global(mesh, material)
    pr = Problem(mesh, blocks, f=f, g=g, theta0=theta, u_D=u, theta_D=theta)
    w = run_march("fine", pr, TimeGrid.uniform(T, tau), store="final").final
    N = mesh.n_nodes
    return (_l2_midpoint(mesh, w[:N], lambda X, Y: u(X, Y, T)[0]),
            _l2_midpoint(mesh, w[N:2 * N], lambda X, Y: u(X, Y, T)[1]),
            _l2_midpoint(mesh, w[2 * N:], lambda X, Y: theta(X, Y, T)))


def spatial_study(sizes=(16, 32, 64), T=1.0):
    """Errors and observed orders for ``u = (s t, s t)``, ``theta = s t``, ``s = sin(pi x) sin(pi y)``, tau = h."""
    x, y, t = sympy.symbols("x y t")
    s = sympy.sin(sympy.pi * x) * sympy.sin(sympy.pi * y)
    fields = manufactured_fields(s * t, s * t, s * t)
    errs = np.array([manufactured_errors(n, 1.0 / n, T, fields) for n in sizes])
    orders = np.log2(errs[:-1] / errs[1:])
    return errs, orders


def temporal_study(steps=(8, 16, 32, 64), T=1.0):
    """Errors and orders for fields linear in space and ``exp(-t)`` in time (no spatial error)."""
    x, y, t = sympy.symbols("x y t")
    decay = sympy.exp(-t)
    fields = manufactured_fields((x + 0.5 * y) * decay, (0.25 * x - y) * decay, (1 + x + 2 * y) * decay)
    errs = np.array([manufactured_errors(4, T / k, T, fields) for k in steps])
    total = errs.sum(axis=1)
    return total, np.log2(total[:-1] / total[1:])


def manufactured_suite(sizes=(16, 32, 64)):
    errs, orders = spatial_study(sizes)
    out = [Check("spatial order (u1, u2, theta)", bool(np.all(orders[-1] >= 1.8)),
                 "orders " + " | ".join(", ".join(f"{o:.3f}" for o in row) for row in orders))]
    terr, tord = temporal_study()
    out.append(Check("temporal order", bool(np.all((tord >= 0.8) & (tord <= 1.2))),
                     "orders " + ", ".join(f"{o:.3f}" for o in tord)))
    return out


# ---------------------------------------------------------------- invariants

def random_material(n_elements, rng, contrast=10.0):
    draw = lambda: np.exp(rng.uniform(0.0, np.log(contrast), n_elements))
    return MaterialField(draw(), draw(), draw(), draw())


def principal_angles(U, V, inner=None):
    """Largest principal angle between ``span U`` and ``span V`` (optionally in an inner product)."""
    if inner is not None:
        Lc = np.linalg.cholesky(inner)
        U, V = Lc.T @ U, Lc.T @ V
    return float(np.max(sla.subspace_angles(U, V)))


def invariant_suite(seed=0):
    rng = np.random.default_rng(seed)
    out = []
    pair = build_mesh_pair(8, 8, 2, 2)
    mesh = pair.fine
    mat = random_material(mesh.n_elements, rng)
    cfg = SpectralConfig(0.4, 0.04, 6)

    # rigid-body kernel of every patch pencil
    spectra = solve_all_patches(pair, mat, cfg, None)
    counts = [int(np.sum(np.abs(s.raw) < 1e-8 * np.abs(s.raw).max())) for s in spectra]
    out.append(Check("rigid-mode kernel (>= 3 per patch)", min(counts) >= 3, f"zero-mode counts {counts}"))

    # adjointness of the coupling blocks
    blocks = assemble_global(mesh, mat)
    xu, yt = rng.standard_normal(2 * mesh.n_nodes), rng.standard_normal(mesh.n_nodes)
    lhs, rhs = (blocks.A3 @ xu) @ yt, xu @ (blocks.A2 @ yt)
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    out.append(Check("A3 = A2^T adjointness", rel <= 1e-12, f"relative mismatch {rel:.2e}"))

    # Galerkin energy identity
    pou = build_partition_of_unity(pair)
    basis = build_multiscale_basis(pair, pou, spectra, 6)
    A, _ = blocks.evolution_matrices(0.02)
    Ac = (basis.R.T @ A @ basis.R).toarray()
    worst = 0.0
    for _ in range(10):
        vc = rng.standard_normal(basis.n_columns)
        v = basis.R @ vc
        a, b = vc @ Ac @ vc, v @ (A @ v)
        worst = max(worst, abs(a - b) / abs(b))
    out.append(Check("Galerkin energy identity", worst <= 1e-12, f"max relative mismatch {worst:.2e}"))

    # partition of unity
    for kind in ("bilinear", "msfem-harmonic"):
        p = build_partition_of_unity(pair, kind, mat.kappa)
        dev = float(np.abs(np.asarray(p.values.sum(axis=1)).ravel() - 1.0).max())
        out.append(Check(f"partition of unity sums to 1 ({kind})", dev <= 1e-12, f"max deviation {dev:.2e}"))

    # discrete energy decay with zero sources
    pr = Problem(mesh, blocks, theta0=lambda x, y, t: np.sin(7 * x + 3 * y) + rng.standard_normal(x.shape))
    hist = run_march("fine", pr, TimeGrid.uniform(1.0, 0.02), store="full")
    E = np.array([discrete_energy(blocks, w) for w in hist.states])
    inc = float(np.max(np.diff(E) / E[:-1]))
    out.append(Check("discrete energy decay (50 steps)", inc <= 1e-12, f"max relative increase {inc:.2e}"))

    # selection invariance under a uniform mass rescaling
    pb = assemble_patch(pair, mat, 4)
    Ap, Mp = pb.spectral_pencil(0.4, 0.04)
    w1, V1, _, _ = solve_dense_pencil(Ap, Mp, 10)
    c = pair.coarse.H
    w2, V2, _, _ = solve_dense_pencil(Ap, Mp * c, 10)
    ev = float(np.abs(w2[:10] * c - w1[:10]).max() / np.abs(w1[:10]).max())
    mis = max(principal_angles(V1[:, g], V2[:, g]) for g in eigen_clusters(w1[:10]))
    out.append(Check("selection invariant under mass rescaling", ev <= 1e-10 and mis <= 1e-8,
                     f"eigenvalue mismatch {ev:.2e}, max cluster angle {mis:.2e}"))

    # gamma = 0 subspace equivalence with the decoupled baseline
    angles = []
    for pid in range(pair.coarse.n_vertices):
        pb = assemble_patch(pair, mat, pid)
        sc = solve_patch_spectrum(pb, SpectralConfig(0.0, 0.0, 8), None)
        L = _gap_index(sc.raw.real, 8)
        n = pb.dofs.n_nodes
        Vc = sc.select(L)
        n_u = int(np.sum(np.linalg.norm(Vc[2 * n:], axis=0) < 1e-8))
        dec = solve_decoupled_patch(pb, L + 1)
        Vd = dec.select(n_u, L - n_u)
        angles.append(principal_angles(Vc, Vd))
    out.append(Check("gamma = 0 matches decoupled baseline", max(angles) < 1e-8,
                     f"max principal angle {max(angles):.2e}"))
    return out


def eigen_clusters(vals, rtol=1e-8):
    """Index groups of numerically equal eigenvalues (degenerate clusters compared as subspaces)."""
    scale = max(np.abs(vals).max(), 1e-300)
    groups, cur = [], [0]
    for k in range(1, len(vals)):
        if abs(vals[k] - vals[cur[-1]]) <= rtol * scale:
            cur.append(k)
        else:
            groups.append(cur)
            cur = [k]
    groups.append(cur)
    return groups


def _gap_index(vals, near):
    """An index ``L`` close to ``near`` where ``vals[L-1]`` and ``vals[L]`` are well separated."""
    scale = np.abs(vals).max()
    best = None
    for L in sorted(range(4, len(vals) - 1), key=lambda k: abs(k - near)):
        if vals[L] - vals[L - 1] > 1e-6 * scale:
            best = L
            break
    return best


# ---------------------------------------------------------------- full enrichment and the interpolation bound

def full_enrichment_gap(nx=4, Nx=2, gamma=(0.4, 0.04), seed=0, steps=10, tau=0.02):
    """Max over steps of the relative energy-norm gap between fine and fully enriched CGMsFEM."""
    rng = np.random.default_rng(seed)
    pair = build_mesh_pair(nx, nx, Nx, Nx)
    mesh = pair.fine
    mat = random_material(mesh.n_elements, rng)
    blocks = assemble_global(mesh, mat)
    spectra = solve_all_patches(pair, mat, SpectralConfig(*gamma, 1), None)
    full = [s.vectors.shape[1] for s in spectra]
    basis = build_multiscale_basis(pair, build_partition_of_unity(pair), spectra, full)
    pr = Problem(mesh, blocks, g=lambda x, y, t: 10.0 + 0 * x,
                 theta0=lambda x, y, t: 500 * x * (1 - x) * y * (1 - y))
    grid = TimeGrid.uniform(steps * tau, tau)
    ref = run_march("fine", pr, grid, store="full")
    cg = run_march("cgmsfem", pr, grid, basis, store="full")
    E = blocks.energy_operator()
    gaps = []
    for a, b in zip(ref.states, cg.states):
        d = a - b
        gaps.append(np.sqrt(d @ (E @ d) / max(a @ (E @ a), 1e-300)))
    return float(max(gaps)), basis.n_columns, sum(full)


def galerkin_residual(nx=8, Nx=2, L=6, seed=0, tau=0.02, steps=5):
    """Max relative norm of ``R^T (A w^n - B w^{n-1} - F^n)`` over the first steps."""
    rng = np.random.default_rng(seed)
    pair = build_mesh_pair(nx, nx, Nx, Nx)
    mesh = pair.fine
    mat = random_material(mesh.n_elements, rng)
    blocks = assemble_global(mesh, mat)
    spectra = solve_all_patches(pair, mat, SpectralConfig(0.4, 0.04, L), L + 1)
    basis = build_multiscale_basis(pair, build_partition_of_unity(pair), spectra, L)
    pr = Problem(mesh, blocks, g=lambda x, y, t: 10.0 + 0 * x, theta0=lambda x, y, t: np.sin(3 * x) * y)
    st = CoarseStepper(pr, basis, tau)
    times = np.arange(steps + 1) * tau
    wc = st.project(initial_state(pr))
    worst = 0.0
    for n in range(1, steps + 1):
        prev = st.downscale(wc, times[n - 1])
        wc = st.step(wc, times[n - 1], times[n])
        cur = st.downscale(wc, times[n])
        F, G = pr.loads(times[n])
        r = st.fine.A @ cur - st.B @ prev - np.concatenate([F, tau * G])
        scale = np.linalg.norm(basis.R.T @ (st.B @ prev)) + np.linalg.norm(basis.R.T @ np.concatenate([F, tau * G]))
        worst = max(worst, np.linalg.norm(basis.R.T @ r) / scale)
    return worst


def lemma_suite(gamma1=0.04, L=6, trials=100, seed=0, nx=8, Nx=2):
    """Interpolation bound in the symmetric configuration ``gamma2 = -gamma1`` on every patch."""
    rng = np.random.default_rng(seed)
    pair = build_mesh_pair(nx, nx, Nx, Nx)
    mat = random_material(pair.fine.n_elements, rng)
    out = []
    spectra = solve_all_patches(pair, mat, SpectralConfig(gamma1, -gamma1, L), None)
    for s in spectra:
        res = interpolation_check(s, L, trials=trials, orders=(1, 2), rng=rng, slack=1e-8)
        out.append(Check(f"interpolation bound, patch {s.patch_id}", res.ok,
                         f"{res.passed}/{res.trials} trials; worst margins "
                         + ", ".join(f"s={k}: {v:.3g}" for k, v in res.worst_margin.items())))
    return out


def run_suite(name):
    if name == "manufactured":
        return manufactured_suite()
    if name == "invariants":
        return invariant_suite()
    if name == "lemma":
        return lemma_suite()
    raise ValueError(f"unknown suite {name!r}; choose manufactured, invariants or lemma")
