"""Backward-Euler marching for the fine reference system and the projected coarse systems."""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_loads, interpolate

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class ConstraintError(RuntimeError):
    pass


class ConditioningError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    steps: tuple  # step sizes tau_n

    def __post_init__(self):
        if len(self.steps) == 0 or any(not t > 0 for t in self.steps):
            raise ValueError("time steps must be positive")

    @classmethod
    def uniform(cls, T, tau):
        n = int(round(T / tau))
        if n < 1 or not np.isclose(n * tau, T, rtol=1e-9, atol=0):
            raise ValueError(f"T={T} is not a multiple of tau={tau}")
        return cls((float(T) / n,) * n)

    @property
    def n_steps(self):
        return len(self.steps)

    @property
    def T(self):
        return float(np.sum(self.steps))

    @property
    def times(self):
        return np.concatenate([[0.0], np.cumsum(self.steps)])


def _zero_vec(x, y, t):
    return (0.0 * x, 0.0 * x)


def _zero(x, y, t):
    return 0.0 * x


@dataclass
class Problem:
    """Fine discretization plus data: sources, initial temperature and Dirichlet values."""

    mesh: object
    blocks: object
    f: object = _zero_vec  # (x, y, t) -> (fx, fy)
    g: object = _zero  # (x, y, t) -> scalar
    theta0: object = _zero  # (x, y, t) -> scalar, evaluated at t=0
    u_D: object = None  # (x, y, t) -> (u1, u2); None means homogeneous
    theta_D: object = None
    _loads: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    def loads(self, t):
        key = float(t)
        if key not in self._loads:
            if len(self._loads) > 4:
                self._loads.clear()
            self._loads[key] = assemble_loads(self.mesh, self.f, self.g, t)
        return self._loads[key]

    def boundary(self, t):
        """Full dof vector carrying Dirichlet values (zero elsewhere)."""
        n = self.n_nodes
        w = np.zeros(3 * n)
        fixed = self.blocks.dofs.dirichlet
        if self.u_D is not None:
            u1, u2 = self.u_D(self.mesh.nodes[:, 0], self.mesh.nodes[:, 1], t)
            w[:n] = u1
            w[n:2 * n] = u2
        if self.theta_D is not None:
            w[2 * n:] = interpolate(self.mesh, self.theta_D, t)
        w[~fixed] = 0.0
        return w


def _solve_checked(lu, A, b, what):
    x = lu.solve(b)
    bn = max(np.linalg.norm(b), np.finfo(float).tiny)
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r) <= RESIDUAL_TOL * bn:
            return x
        x = x + lu.solve(r)
    r = np.linalg.norm(b - A @ x) / bn
    if r > RESIDUAL_TOL:
        raise RuntimeError(f"{what}: relative residual {r:.2e} above {RESIDUAL_TOL}")
    return x


def initial_state(problem, t=0.0):
    """``theta^0`` interpolates ``theta0``; ``u^0`` solves ``A1 u = F + A2 theta`` on free dofs."""
    n = problem.n_nodes
    bl = problem.blocks
    fixed = bl.dofs.dirichlet
    w = problem.boundary(t)
    th = interpolate(problem.mesh, problem.theta0, t)
    free_t = ~fixed[2 * n:]
    w[2 * n:][free_t] = th[free_t]
    free_u = np.nonzero(~fixed[:2 * n])[0]
    if free_u.size == 2 * n:
        raise ConstraintError("displacement has no Dirichlet dofs; A1 is singular")
    F, _ = problem.loads(t)
    rhs = F + bl.A2 @ w[2 * n:] - bl.A1 @ w[:2 * n]
    A1f = bl.A1[free_u][:, free_u].tocsc()
    if free_u.size:
        w[free_u] = _solve_checked(spla.splu(A1f), A1f, rhs[free_u], "initial momentum solve")
    return w


class FineStepper:
    """Backward-Euler step ``A^n w^n = B w^{n-1} + F^n`` on free dofs, factorized once per tau."""

    def __init__(self, problem, tau):
        self.problem = problem
        self.tau = float(tau)
        self.A, self.B = problem.blocks.evolution_matrices(self.tau)
        fixed = problem.blocks.dofs.dirichlet
        self.free = np.nonzero(~fixed)[0]
        self.fixed = np.nonzero(fixed)[0]
        self.Aff = self.A[self.free][:, self.free].tocsc()
        self.AfD = self.A[self.free][:, self.fixed].tocsr()
        self.lu = spla.splu(self.Aff)

    def rhs(self, w_prev, t):
        F, G = self.problem.loads(t)
        return self.B @ w_prev + np.concatenate([F, self.tau * G])

    def step(self, w_prev, t):
        w = self.problem.boundary(t)
        b = self.rhs(w_prev, t)[self.free] - self.AfD @ w[self.fixed]
        w[self.free] = _solve_checked(self.lu, self.Aff, b, "fine step")
        return w


def step_fine(stepper, w_prev, t):
    return stepper.step(w_prev, t)


class CoarseStepper:
    """Projected step ``R^T A R w_c^n = R^T B R w_c^{n-1} + R^T F^n`` (plus Dirichlet lifting)."""

    def __init__(self, problem, basis, tau, fine=None):
        self.problem = problem
        self.R = basis.R.tocsc()
        self.fine = fine if fine is not None else FineStepper(problem, tau)
        self.tau = self.fine.tau
        RT = self.R.T.tocsr()
        self.RtA = (RT @ self.fine.A).tocsr()
        self.RtB = (RT @ self.B).tocsr()
        Ac = (self.RtA @ self.R).toarray()
        self.Ac = Ac
        self.Bc = (self.RtB @ self.R).toarray()
        # diag(Ac) = u'A1u + th'(M' + tau A4)th > 0: the coupling terms cancel
        dg = np.diag(Ac)
        if np.any(dg <= 0):
            raise ConditioningError("coarse matrix has a non-positive diagonal entry")
        self.scale = 1.0 / np.sqrt(dg)
        As = Ac * self.scale[:, None] * self.scale[None, :]
        self.lu = sla.lu_factor(As, check_finite=True)
        rcond, _ = sla.lapack.dgecon(self.lu[0], np.linalg.norm(As, 1), norm="1")
        self.rcond = float(rcond)
        if self.rcond < 1e-14:
            raise ConditioningError(
                f"coarse matrix is numerically rank deficient (rcond {self.rcond:.1e}); "
                "drop dependent basis columns (spectral.drop_dependent_columns) or lower L")
        G = (RT @ self.R).toarray()
        self.gram = sla.cho_factor(G)

    @property
    def B(self):
        return self.fine.B

    def project(self, w):
        """Least-squares coefficients of ``w`` minus its Dirichlet part."""
        lift = np.zeros_like(w)
        lift[self.fine.fixed] = w[self.fine.fixed]
        return sla.cho_solve(self.gram, self.R.T @ (w - lift))

    def rhs(self, wc_prev, wD_prev, wD, t):
        F, G = self.problem.loads(t)
        Fn = np.concatenate([F, self.tau * G])
        return self.Bc @ wc_prev + self.R.T @ Fn + self.RtB @ wD_prev - self.RtA @ wD

    def step(self, wc_prev, t_prev, t):
        wD_prev = self.problem.boundary(t_prev)
        wD = self.problem.boundary(t)
        b = self.rhs(wc_prev, wD_prev, wD, t)
        d = self.scale
        x = d * sla.lu_solve(self.lu, d * b)
        x = x + d * sla.lu_solve(self.lu, d * (b - self.Ac @ x))
        return x

    def downscale(self, wc, t):
        return self.R @ wc + self.problem.boundary(t)


def step_coarse(stepper, wc_prev, t_prev, t):
    return stepper.step(wc_prev, t_prev, t)


def downscale(basis, wc):
    wc = np.asarray(wc, dtype=float)
    if wc.shape[0] != basis.R.shape[1]:
        raise ValueError(f"coarse vector has {wc.shape[0]} entries, basis has {basis.R.shape[1]} columns")
    return basis.R @ wc


@dataclass
class SolutionHistory:
    policy: str
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    coarse: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]

    def keep(self, n, n_total, stride=5):
        if self.policy == "full":
            return True
        if n == n_total:
            return True
        return self.policy == "strided" and n % stride == 0

    def record(self, n, t, w, wc=None):
        self.steps.append(n)
        self.times.append(float(t))
        self.states.append(np.array(w))
        if wc is not None:
            self.coarse.append(np.array(wc))


def run_march(mode, problem, grid, basis=None, store="strided", w0=None):
    """March ``mode`` in {fine, cgmsfem, gmsfem} over ``grid``; multiscale modes need ``basis``."""
    if store not in ("final", "strided", "full"):
        raise ValueError(f"unknown storage policy {store!r}")
    hist = SolutionHistory(store)
    times = grid.times
    w = initial_state(problem) if w0 is None else np.array(w0)
    steppers = {}

    def stepper(tau):
        key = round(tau, 15)
        if key not in steppers:
            if mode == "fine":
                steppers[key] = FineStepper(problem, tau)
            else:
                steppers[key] = CoarseStepper(problem, basis, tau)
        return steppers[key]

    if mode == "fine":
        if hist.keep(0, grid.n_steps):
            hist.record(0, 0.0, w)
        for n, tau in enumerate(grid.steps, start=1):
            w = stepper(tau).step(w, times[n])
            if hist.keep(n, grid.n_steps):
                hist.record(n, times[n], w)
        return hist

    if mode not in ("cgmsfem", "gmsfem"):
        raise ValueError(f"unknown march mode {mode!r}")
    if basis is None:
        raise ValueError(f"{mode} march needs a multiscale basis")
    st = stepper(grid.steps[0])
    wc = st.project(w)
    if hist.keep(0, grid.n_steps):
        hist.record(0, 0.0, st.downscale(wc, 0.0), wc)
    for n, tau in enumerate(grid.steps, start=1):
        st = stepper(tau)
        wc = st.step(wc, times[n - 1], times[n])
        if hist.keep(n, grid.n_steps):
            hist.record(n, times[n], st.downscale(wc, times[n]), wc)
    return hist


def discrete_energy(blocks, w):
    """``0.5 u^T A1 u + 0.5 theta^T M' theta``."""
    n = blocks.dofs.n_nodes
    u, th = w[:2 * n], w[2 * n:]
    return 0.5 * u @ (blocks.A1 @ u) + 0.5 * th @ (blocks.Mp @ th)
