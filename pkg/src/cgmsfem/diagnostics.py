"""Relative energy errors, eigenvalue-decay tables and local interpolation checks."""
from dataclasses import dataclass

import numpy as np


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class EnergyErrors:
    err_u: float
    err_theta: float
    err_w: float
    # squared numerators / denominators, kept for consistency checks
    num_u: float = 0.0
    num_theta: float = 0.0
    ref_u: float = 0.0
    ref_theta: float = 0.0


def _ratio(num, den, what):
    if den > 0:
        return float(np.sqrt(num / den))
    if num == 0:
        return 0.0
    raise UndefinedRatioError(f"reference {what} energy is zero but the error is not")


def energy_errors(reference, candidate, blocks):
    """Relative energy errors of ``candidate`` against ``reference`` (full fine dof vectors)."""
    reference = np.asarray(reference, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    if reference.shape != candidate.shape:
        raise ValueError("solutions live on different dof maps")
    n = blocks.dofs.n_nodes
    e = candidate - reference
    eu, et = e[:2 * n], e[2 * n:]
    ru, rt = reference[:2 * n], reference[2 * n:]
    nu = float(eu @ (blocks.A1 @ eu))
    nt = float(et @ (blocks.A4 @ et))
    du = float(ru @ (blocks.A1 @ ru))
    dt = float(rt @ (blocks.A4 @ rt))
    return EnergyErrors(
        _ratio(nu, du, "displacement"),
        _ratio(nt, dt, "temperature"),
        _ratio(nu + nt, du + dt, "total"),
        nu, nt, du, dt,
    )


def eigen_decay_report(spectra, L_list):
    """``[(L, Lambda_{L+1})]`` with ``Lambda_{L+1}`` the minimum over patches of the reported value."""
    rows = []
    for L in sorted(L_list):
        vals = []
        for s in spectra:
            if s.raw.size <= L:
                raise ValueError(f"patch {s.patch_id} has only {s.raw.size} modes; need {L + 1}")
            vals.append(s.lambda_next(L))
        rows.append((L, float(min(vals))))
    return rows


def _require_symmetric(spectrum):
    if not spectrum.symmetric:
        raise NotImplementedError(
            "interpolation bounds need an M-orthogonal eigenbasis; use gamma2 = -gamma1")


def mass_coefficients(spectrum, w):
    """``M(w, psi_l)`` for every kept eigenvector."""
    return spectrum.vectors.real.T @ (spectrum.M @ w)


def seminorm(spectrum, w, s):
    """``sum_l (Lambda_l / H^2)^s M(w, psi_l)^2`` over the kept (complete) spectrum."""
    _require_symmetric(spectrum)
    c = mass_coefficients(spectrum, w)
    lam = spectrum.raw.real[:c.size]
    return float(np.sum(lam ** s * c ** 2))


def interpolate_local(spectrum, w, L):
    c = mass_coefficients(spectrum, w)[:L]
    return spectrum.vectors.real[:, :L] @ c


@dataclass(frozen=True)
class InterpolationCheck:
    passed: int
    trials: int
    worst_margin: dict  # s -> min over trials of (bound - error) / bound

    @property
    def ok(self):
        return self.passed == self.trials


def interpolation_check(spectrum, L, trials=100, orders=(1, 2), rng=None, slack=1e-8):
    """Randomized check of ``M(w - I_L w) <= (H^2 / Lambda_{L+1})^s |||w|||_s^2``.

    ``w`` is drawn from the span of the first ``2L`` eigenvectors. Needs a
    symmetric pencil with at least ``2L`` kept modes.
    """
    _require_symmetric(spectrum)
    if spectrum.vectors.shape[1] < 2 * L:
        raise ValueError(f"need {2 * L} kept modes, have {spectrum.vectors.shape[1]}")
    rng = np.random.default_rng(0) if rng is None else rng
    V = spectrum.vectors.real[:, :2 * L]
    lam_next = spectrum.raw.real[L]
    worst = {s: np.inf for s in orders}
    passed = 0
    for _ in range(trials):
        w = V @ rng.standard_normal(2 * L)
        r = w - interpolate_local(spectrum, w, L)
        err = float(r @ (spectrum.M @ r))
        ok = True
        for s in orders:
            bound = seminorm(spectrum, w, s) / lam_next ** s
            margin = (bound - err) / max(abs(bound), np.finfo(float).tiny)
            worst[s] = min(worst[s], margin)
            ok &= err <= bound * (1 + slack) + slack * np.finfo(float).eps
        passed += bool(ok)
    return InterpolationCheck(passed, trials, worst)
