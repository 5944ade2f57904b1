"""Sweep the thermal-expansion contrast of the Test A two-phase medium.

    python scripts/sweep_test_a.py --values 10,100,1000,5000,10000
"""
import argparse

from cgmsfem import config as C
from cgmsfem.experiment import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="test-a-desk", choices=["test-a", "test-a-desk"])
    ap.add_argument("--values", default="10,100,1000,10000")
    ap.add_argument("--out", default="runs/test-a")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = C.preset(args.preset).replace(workers=args.workers, write_vtk=False)
    values = [float(v) for v in args.values.split(",")]
    rows = run_sweep(cfg, "beta_contrast", values, args.out)
    for r in rows:
        if r[3] == "cgmsfem":
            print(f"beta contrast {r[2]:>8g}: E_w cgm {r[10]:.4f}  cgm/gm {r[-1]:.3f}")


if __name__ == "__main__":
    main()
