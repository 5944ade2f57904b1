"""Sweep the log-standard deviation of the KLE thermal-expansion field (Test B).

Errors are averaged over the preset's sample count.

    python scripts/sweep_test_b.py --values 2,3,4,5,6
"""
import argparse

from cgmsfem import config as C
from cgmsfem.experiment import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="test-b-desk", choices=["test-b", "test-b-desk"])
    ap.add_argument("--values", default="2,4,6")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--out", default="runs/test-b")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = C.preset(args.preset).replace(workers=args.workers, write_vtk=False)
    if args.samples:
        cfg = cfg.replace(samples=args.samples)
    values = [float(v) for v in args.values.split(",")]
    rows = run_sweep(cfg, "sigma", values, args.out)
    for r in rows:
        if r[3] == "cgmsfem":
            print(f"sigma {r[2]:>4g}: mean E_w cgm {r[10]:.4f}  cgm/gm {r[-1]:.3f}")


if __name__ == "__main__":
    main()
