"""Config-driven experiments: build the fields, march every method, write CSV, VTK and a manifest."""
import csv
import io
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .assembly import assemble_global
from .coeffs import FIELD_NAMES, KleSpec, MaterialField, kle_log_field, phase_indicator, raster_field, \
    read_raster, sample_kle_field
from .config import compile_expression, compile_vector
from .diagnostics import energy_errors
from .mesh import bottom_edge, build_mesh_pair, build_partition_of_unity, whole_boundary
from .spectral import SpectralConfig, build_gmsfem_baseline, build_multiscale_basis, solve_all_decoupled, \
    solve_all_patches
from .timeloop import Problem, TimeGrid, run_march
from .vtk import write_state

log = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment_id", "method", "L", "gamma1", "gamma2", "lambda_L1",
               "err_theta", "err_u", "err_w", "wall_ms")
SWEEP_COLUMNS = ("experiment_id", "axis", "value") + CSV_COLUMNS[1:] + ("ratio_cgm_gm",)


def sample_rng(seed, sample):
    return np.random.default_rng([int(seed), int(sample)])


def _two_phase(mat_cfg, mask):
    out = {}
    for f in FIELD_NAMES:
        high = mask if mat_cfg.high_phase.get(f, "inclusion") == "inclusion" else ~mask
        out[f] = float(mat_cfg.base[f]) * np.where(high, float(mat_cfg.contrast[f]), 1.0)
    return MaterialField(**out)


def build_material(cfg, mesh, sample=0):
    """Material field for sample ``sample`` (random sources draw from ``(seed, sample)``)."""
    m = cfg.material
    if m.source == "periodic":
        return _two_phase(m, phase_indicator(mesh, m.period, m.shape, m.size))
    if m.source == "random_phase":
        k = m.phase_kle
        spec = KleSpec(k.length, k.sigma, k.mean, k.terms, cfg.seed)
        return _two_phase(m, kle_log_field(mesh, spec, sample_rng(cfg.seed, sample)) > m.threshold)
    if m.source == "kle":
        rng = sample_rng(cfg.seed, sample)
        vals = {}
        for f in FIELD_NAMES:
            k = m.kle[f]
            vals[f] = sample_kle_field(mesh, KleSpec(k.length, k.sigma, k.mean, k.terms, cfg.seed), rng)
        return MaterialField(**vals)
    if m.source == "raster":
        return MaterialField(**{f: raster_field(mesh, read_raster(m.raster[f])) for f in FIELD_NAMES})
    raise ValueError(f"unknown material source {m.source!r}")


def build_pair(cfg):
    pred = bottom_edge if cfg.mesh.dirichlet == "bottom" else whole_boundary
    return build_mesh_pair(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.Nx, cfg.mesh.Ny, dirichlet=pred)


def build_problem(cfg, mesh, material):
    blocks = assemble_global(mesh, material)
    s = cfg.sources
    return Problem(mesh, blocks,
                   f=compile_vector(s.f, "sources.f"),
                   g=compile_expression(s.g, "sources.g"),
                   theta0=compile_expression(s.theta0, "sources.theta0"))


def _L_list(cfg):
    return list(cfg.basis.L) if isinstance(cfg.basis.L, (list, tuple)) else [int(cfg.basis.L)]


def _split(cfg, L):
    if cfg.basis.split is not None:
        lu, lt = (int(v) for v in cfg.basis.split)
        if lu + lt != L:
            raise ValueError(f"basis.split {cfg.basis.split} does not add up to L={L}")
        return lu, lt
    return L - L // 2, L // 2


@dataclass
class SampleResult:
    rows: list
    eigen_rows: list = field(default_factory=list)
    step_rows: list = field(default_factory=list)
    states: dict = field(default_factory=dict)  # label -> (times, states)
    timings: dict = field(default_factory=dict)


def _errors_over(hist, ref_hist, blocks):
    by_step = dict(zip(ref_hist.steps, ref_hist.states))
    out = []
    for n, t, w in zip(hist.steps, hist.times, hist.states):
        if n in by_step:
            out.append((n, t, energy_errors(by_step[n], w, blocks)))
    return out


def evaluate_sample(cfg, pair, material, experiment_id, keep_states=False):
    """March the fine reference and every requested multiscale method for every L."""
    timings = {}
    clock = time.perf_counter
    t0 = clock()
    problem = build_problem(cfg, pair.fine, material)
    grid = TimeGrid.uniform(cfg.time.T, cfg.time.tau)
    ref = run_march("fine", problem, grid, store=cfg.store)
    timings["fine_ms"] = 1e3 * (clock() - t0)
    pou = build_partition_of_unity(pair, cfg.basis.pou, material.kappa if cfg.basis.pou != "bilinear" else None)
    Ls = _L_list(cfg)
    n_keep = max(Ls) + 1
    g1, g2 = float(cfg.basis.gamma1), float(cfg.basis.gamma2)
    res = SampleResult([], timings=timings)
    if keep_states:
        res.states["fine"] = (ref.times, ref.states)

    if "cgmsfem" in cfg.methods:
        t0 = clock()
        spectra = solve_all_patches(pair, material, SpectralConfig(g1, g2, max(Ls)), n_keep, cfg.workers)
        timings["cgmsfem_spectra_ms"] = 1e3 * (clock() - t0)
        for s in spectra:
            for r, lam in enumerate(s.scaled[:n_keep]):
                res.eigen_rows.append((s.patch_id, r, lam.real, lam.imag))
        for L in Ls:
            t0 = clock()
            basis = build_multiscale_basis(pair, pou, spectra, L)
            hist = run_march("cgmsfem", problem, grid, basis, store=cfg.store)
            ms = 1e3 * (clock() - t0)
            lam = min(s.lambda_next(L) for s in spectra)
            e = energy_errors(ref.final, hist.final, problem.blocks)
            res.rows.append([experiment_id, "cgmsfem", L, g1, g2, lam, e.err_theta, e.err_u, e.err_w, ms])
            res.step_rows += [[experiment_id, "cgmsfem", L, n, t, x.err_theta, x.err_u, x.err_w]
                              for n, t, x in _errors_over(hist, ref, problem.blocks)]
            if keep_states and L == max(Ls):
                res.states[f"cgmsfem_L{L}"] = (hist.times, hist.states)

    if "gmsfem" in cfg.methods:
        t0 = clock()
        dspec = solve_all_decoupled(pair, material, n_keep, cfg.workers)
        timings["gmsfem_spectra_ms"] = 1e3 * (clock() - t0)
        for L in Ls:
            t0 = clock()
            lu, lt = _split(cfg, L)
            basis = build_gmsfem_baseline(pair, pou, split=(lu, lt), spectra=dspec)
            hist = run_march("gmsfem", problem, grid, basis, store=cfg.store)
            ms = 1e3 * (clock() - t0)
            # smallest discarded eigenvalue over both decoupled spectra
            lam = min(min(d.elastic.lambda_next(lu), d.thermal.lambda_next(lt)) for d in dspec)
            e = energy_errors(ref.final, hist.final, problem.blocks)
            res.rows.append([experiment_id, "gmsfem", L, 0.0, 0.0, lam, e.err_theta, e.err_u, e.err_w, ms])
            res.step_rows += [[experiment_id, "gmsfem", L, n, t, x.err_theta, x.err_u, x.err_w]
                              for n, t, x in _errors_over(hist, ref, problem.blocks)]
            if keep_states and L == max(Ls):
                res.states[f"gmsfem_L{L}"] = (hist.times, hist.states)
    return res


def _mean_rows(experiment_id, per_sample):
    """Average error columns over samples, row by row (rows align by method and L)."""
    out = []
    for rows in zip(*per_sample):
        base = list(rows[0])
        base[0] = experiment_id
        for col in (5, 6, 7, 8, 9):
            base[col] = float(np.mean([r[col] for r in rows]))
        out.append(base)
    return out


@dataclass
class ExperimentResult:
    rows: list  # per-sample rows followed by mean rows for random experiments
    mean_rows: list
    eigen_rows: list
    step_rows: list
    failures: list
    timings: dict
    states: dict


def evaluate(cfg, keep_states=False):
    pair = build_pair(cfg)
    rows, per_sample, eig, steps, fails, states = [], [], [], [], [], {}
    timings = {}
    for k in range(cfg.samples):
        eid = cfg.name if cfg.samples == 1 else f"{cfg.name}/s{k:03d}"
        try:
            material = build_material(cfg, pair.fine, k)
            res = evaluate_sample(cfg, pair, material, eid, keep_states and k == 0)
        except Exception as exc:  # recorded, not fatal: one bad sample must not sink the run
            log.warning("sample %d failed: %s", k, exc)
            fails.append({"sample": k, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows += res.rows
        per_sample.append(res.rows)
        steps += res.step_rows
        if not eig:
            eig = res.eigen_rows
        if keep_states and k == 0:
            states = res.states
        for key, v in res.timings.items():
            timings[key] = timings.get(key, 0.0) + v
    means = _mean_rows(f"{cfg.name}/mean", per_sample) if cfg.samples > 1 and per_sample else []
    if not per_sample:
        raise RuntimeError(f"every sample failed: {fails}")
    return ExperimentResult(rows + means, means, eig, steps, fails, timings, states)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(path, header, rows, blank_cols=()):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    drop = {header.index(c) for c in blank_cols}
    for r in rows:
        w.writerow(["" if i in drop else _fmt(v) for i, v in enumerate(r)])
    Path(path).write_text(buf.getvalue())


def _manifest(cfg, result, extra=None):
    m = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "versions": {"cgmsfem": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings_ms": {k: round(v, 3) for k, v in result.timings.items()},
        "failures": result.failures,
    }
    m.update(extra or {})
    return m


def run_experiment(cfg, out_dir=None):
    """Run ``cfg`` and write ``errors.csv``, ``errors_steps.csv``, ``eigenvalues.csv``,
    ``fields/*.vtk`` and ``manifest.json`` under ``out_dir``. Returns the result."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = evaluate(cfg, keep_states=cfg.write_vtk)
    blank = () if cfg.timings else ("wall_ms",)
    write_csv(out / "errors.csv", CSV_COLUMNS, result.rows, blank)
    write_csv(out / "errors_steps.csv",
              ("experiment_id", "method", "L", "step", "t", "err_theta", "err_u", "err_w"), result.step_rows)
    write_csv(out / "eigenvalues.csv", ("patch_id", "rank", "re_lambda", "im_lambda"), result.eigen_rows)
    if cfg.write_vtk and result.states:
        pair = build_pair(cfg)
        for label, (times, states) in result.states.items():
            for t, w in zip(times, states):
                write_state(out / "fields" / f"{label}_t{t:.6f}.vtk", pair.fine, w)
    result.timings["total_ms"] = 1e3 * (time.perf_counter() - t0)
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, result), indent=2, default=float) + "\n")
    return result


def sweep_variant(cfg, axis, value):
    """Copy of ``cfg`` with the sweep axis set to ``value``."""
    c = cfg.replace(name=f"{cfg.name}/{axis}={value:g}")
    if axis == "L":
        c.basis.L = [int(value)]
    elif axis == "beta_contrast":
        c.material.contrast["beta"] = float(value)
    elif axis == "sigma":
        if c.material.source != "kle":
            raise ValueError("sigma sweep needs a kle material source")
        c.material.kle["beta"].sigma = float(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    return c


def sweep_rows(cfg, axis, values, results):
    """One row per (value, method, L); cgmsfem rows carry err_w(cgm) / err_w(gm)."""
    out = []
    for v, res in zip(values, results):
        rows = res.mean_rows if res.mean_rows else res.rows
        gm = {r[2]: r[8] for r in rows if r[1] == "gmsfem"}
        for r in rows:
            ratio = ""
            if r[1] == "cgmsfem" and r[2] in gm:
                if gm[r[2]] > 0:
                    ratio = r[8] / gm[r[2]]
                else:
                    ratio = 0.0 if r[8] == 0 else float("inf")
            out.append([r[0], axis, v] + list(r[1:]) + [ratio])
    return out


def run_sweep(cfg, axis=None, values=None, out_dir=None):
    axis = axis or cfg.sweep.axis
    values = list(values if values is not None else cfg.sweep.values)
    if axis is None or not values:
        raise ValueError("sweep needs an axis and at least one value")
    out = Path(out_dir if out_dir is not None else cfg.out)
    results = []
    for v in values:
        sub = sweep_variant(cfg, axis, v)
        results.append(run_experiment(sub, out / f"{axis}_{v:g}"))
    rows = sweep_rows(cfg, axis, values, results)
    blank = () if cfg.timings else ("wall_ms",)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows, blank)
    return rows
