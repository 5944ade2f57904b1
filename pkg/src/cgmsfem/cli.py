"""Command line front end: ``cgmsfem {run,sweep,verify,basis-report,show-config}``."""
import argparse
import csv
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .diagnostics import eigen_decay_report
from .experiment import build_material, build_pair, run_experiment, run_sweep
from .spectral import SpectralConfig, export_eigenfunctions, solve_all_patches
from .verification import run_suite


def _common(p):
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--preset", choices=cfgmod.PRESET_NAMES, help="built-in experiment config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--store", choices=("final", "strided", "full"))


def _load(args):
    if args.config and args.preset:
        raise cfgmod.ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = cfgmod.load(args.config)
    elif args.preset:
        cfg = cfgmod.preset(args.preset)
    else:
        raise cfgmod.ConfigError("one of --config or --preset is required")
    changes = {k: getattr(args, k) for k in ("out", "seed", "workers", "store")
               if getattr(args, k, None) is not None}
    return cfgmod.validate(cfg.replace(**changes)) if changes else cfg


def _parse_values(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_run(args):
    cfg = _load(args)
    result = run_experiment(cfg, cfg.out)
    for row in result.rows:
        print(",".join(str(v) for v in row))
    return 1 if result.failures else 0


def cmd_sweep(args):
    cfg = _load(args)
    values = _parse_values(args.values) if args.values else None
    rows = run_sweep(cfg, args.axis, values, cfg.out)
    print(f"wrote {len(rows)} rows to {Path(cfg.out) / 'sweep.csv'}")
    return 0


def cmd_verify(args):
    checks = run_suite(args.suite)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"{args.suite}: {c.name}: {c.detail}", file=sys.stderr)
    return 1 if failed else 0


def cmd_basis_report(args):
    cfg = _load(args)
    pair = build_pair(cfg)
    material = build_material(cfg, pair.fine, 0)
    Ls = list(cfg.basis.L)
    n_keep = max(max(Ls) + 1, args.count)
    spectra = solve_all_patches(pair, material, SpectralConfig(cfg.basis.gamma1, cfg.basis.gamma2, max(Ls)),
                                n_keep, cfg.workers)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    patches = range(len(spectra)) if args.patch is None else [args.patch]
    written = []
    for pid in patches:
        written += export_eigenfunctions(spectra[pid], pair, pid, out / "eigenfunctions", args.count)
    with open(out / "eigen_decay.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("L", "lambda_L1"))
        for L, lam in eigen_decay_report(spectra, Ls):
            w.writerow((L, f"{lam:.12g}"))
    (out / "basis_report.json").write_text(json.dumps(
        {"config_hash": cfg.digest(), "files": [str(p.relative_to(out)) for p in written]}, indent=2) + "\n")
    print(f"wrote {len(written)} eigenfunction files to {out / 'eigenfunctions'}")
    return 0


def cmd_show_config(args):
    print(_load(args).to_yaml(), end="")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="cgmsfem", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep and write sweep.csv")
    _common(p)
    p.add_argument("--axis", choices=("L", "beta_contrast", "sigma"))
    p.add_argument("--values", help="comma-separated sweep values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=("manufactured", "invariants", "lemma"))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("basis-report", help="export patch eigenfunctions as VTK")
    _common(p)
    p.add_argument("--patch", type=int, help="patch id (default: all patches)")
    p.add_argument("--count", type=int, default=8, help="eigenfunctions per patch")
    p.set_defaults(func=cmd_basis_report)

    p = sub.add_parser("show-config", help="print the resolved config as YAML")
    _common(p)
    p.set_defaults(func=cmd_show_config)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
