"""Spectral radius of the coarse step map ``Ac^-1 Bc`` for both bases over an L sweep.

The fine backward-Euler step is dissipative. A Galerkin space whose columns mix
displacement and temperature does not contain the test pair used in that
energy argument, so the projected step may amplify. This script measures it.

    python scripts/amplification.py --preset periodic-desk --L 4,8,12,16
"""
import argparse

import numpy as np
import scipy.linalg as sla

from cgmsfem import config as C
from cgmsfem.experiment import build_material, build_pair, build_problem
from cgmsfem.mesh import build_partition_of_unity
from cgmsfem.spectral import (SpectralConfig, build_gmsfem_baseline, build_multiscale_basis,
                              solve_all_decoupled, solve_all_patches)
from cgmsfem.timeloop import CoarseStepper


def radius(problem, basis, tau):
    st = CoarseStepper(problem, basis, tau)
    return float(np.max(np.abs(sla.eigvals(st.Bc, st.Ac))))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="periodic-desk", choices=C.PRESET_NAMES)
    ap.add_argument("--L", default="4,8,12,16")
    ap.add_argument("--nx", type=int, help="override the fine grid (coarse grid scaled along)")
    args = ap.parse_args()
    cfg = C.preset(args.preset)
    if args.nx:
        ratio = cfg.mesh.nx // cfg.mesh.Nx
        cfg.mesh.nx = cfg.mesh.ny = args.nx
        cfg.mesh.Nx = cfg.mesh.Ny = args.nx // ratio
    Ls = [int(v) for v in args.L.split(",")]
    pair = build_pair(cfg)
    mat = build_material(cfg, pair.fine, 0)
    problem = build_problem(cfg, pair.fine, mat)
    pou = build_partition_of_unity(pair)
    cs = solve_all_patches(pair, mat, SpectralConfig(cfg.basis.gamma1, cfg.basis.gamma2, max(Ls)), max(Ls) + 1)
    ds = solve_all_decoupled(pair, mat, max(Ls) + 1)
    for L in Ls:
        rc = radius(problem, build_multiscale_basis(pair, pou, cs, L), cfg.time.tau)
        rg = radius(problem, build_gmsfem_baseline(pair, pou, split=(L - L // 2, L // 2), spectra=ds), cfg.time.tau)
        print(f"L={L:>3}: rho cgmsfem {rc:.6f}   rho gmsfem {rg:.6f}")


if __name__ == "__main__":
    main()
