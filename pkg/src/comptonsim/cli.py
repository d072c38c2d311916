"""Command-line interface.

Subcommands: kernel-table, region-dump, simulate-full, simulate-reduced,
verify, preset.  The THREADS environment variable caps numerical-library
parallelism; all runs are deterministic for a fixed config and seed.
Exit code is 0 exactly when every assertion of the invoked command passed.
"""

from __future__ import annotations

import argparse
import os
import sys


def _cap_threads() -> None:
    threads = os.environ.get("THREADS")
    if not threads:
        return
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comptonsim",
        description="Simulators and diagnostics for photon kinetics under Compton scattering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kt = sub.add_parser("kernel-table", help="emit a kernel table as CSV (x, y, B, err)")
    kt.add_argument("--beta", type=float, default=1.0)
    kt.add_argument("--m", type=float, default=1.0)
    kt.add_argument("--tol", type=float, default=1e-10)
    kt.add_argument("--grid-min", type=float, default=0.1)
    kt.add_argument("--grid-max", type=float, default=10.0)
    kt.add_argument("--grid-points", type=int, default=20)
    kt.add_argument("--out", default="kernel_table.csv")

    rd = sub.add_parser("region-dump", help="emit the region boundary curves as CSV")
    rd.add_argument("--theta", type=float, default=0.5)
    rd.add_argument("--delta-star", type=float, default=1.0)
    rd.add_argument("--theta1", type=float, default=0.8)
    rd.add_argument("--grid-min", type=float, default=1e-3)
    rd.add_argument("--grid-max", type=float, default=10.0)
    rd.add_argument("--grid-points", type=int, default=200)
    rd.add_argument("--out", default="region.csv")

    sf = sub.add_parser("simulate-full", help="integrate the regularized full equation")
    sf.add_argument("--config", required=True)
    sf.add_argument("--out", required=True)

    sr = sub.add_parser("simulate-reduced", help="integrate the reduced quadratic equation")
    sr.add_argument("--config", required=True)
    sr.add_argument("--mode", choices=("picard", "atoms"), required=True)
    sr.add_argument("--out", required=True)

    ve = sub.add_parser("verify", help="run the condensed invariant suite")
    ve.add_argument("--seed", type=int, default=7)
    ve.add_argument("--out", default=None, help="keep run outputs in this directory")

    pr = sub.add_parser("preset", help="run a named experiment preset")
    pr.add_argument("name")
    pr.add_argument("--out", required=True)
    pr.add_argument("--seed", type=int, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    args = _build_parser().parse_args(argv)

    from .harness import (
        UnknownPreset,
        load_config,
        preset_names,
        run_full_experiment,
        run_preset,
        run_reduced_experiment,
        verify_suite,
        write_kernel_table,
        write_region_dump,
    )
    from .kernel import PhysicalParams
    from .truncation import TruncationParams

    if args.command == "kernel-table":
        pp = PhysicalParams(beta=args.beta, m=args.m)
        write_kernel_table(pp, args.grid_min, args.grid_max, args.grid_points, args.tol, args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "region-dump":
        tp = TruncationParams.solve(args.theta, args.delta_star, args.theta1)
        write_region_dump(tp, args.grid_min, args.grid_max, args.grid_points, args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "simulate-full":
        cfg = load_config(args.config, equation="full")
        manifest, _ = run_full_experiment(cfg, args.out)
        _print_assertions(manifest.assertions)
        return 0 if manifest.all_passed else 1

    if args.command == "simulate-reduced":
        cfg = load_config(args.config, equation="reduced")
        manifest, _ = run_reduced_experiment(cfg, args.out, mode=args.mode)
        _print_assertions(manifest.assertions)
        return 0 if manifest.all_passed else 1

    if args.command == "verify":
        results = verify_suite(seed=args.seed, out_dir=args.out)
        _print_assertions(results)
        failed = [r for r in results if not r["passed"]]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        return 0 if not failed else 1

    if args.command == "preset":
        try:
            manifest = run_preset(args.name, args.out, args.seed)
        except UnknownPreset as e:
            print(str(e), file=sys.stderr)
            print(f"available presets: {', '.join(preset_names())}", file=sys.stderr)
            return 2
        _print_assertions(manifest.assertions)
        return 0 if manifest.all_passed else 1

    raise AssertionError("unreachable")


def _print_assertions(assertions: list[dict]) -> None:
    for a in assertions:
        status = "PASS" if a["passed"] else "FAIL"
        detail = f"  ({a['detail']})" if a.get("detail") else ""
        print(f"[{status}] {a['name']}{detail}")


if __name__ == "__main__":
    sys.exit(main())
