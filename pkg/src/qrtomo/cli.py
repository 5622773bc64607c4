"""Command line front end: run / compare / theory / all."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, solver, theory
from .geometry import domain_from_mapping, load_config


def _add_common(p):
    p.add_argument("--noise", type=float, default=0.05, help="noise level delta")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None,
                   help="key=value config file overriding the benchmark defaults")
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.add_argument("--full-scale", action="store_true",
                   help="T_x=150, N=15 (multi-minute runs)")
    p.add_argument("--smooth-coefficients", action="store_true",
                   help="apply the moving-average cleanup to the coefficient "
                        "field before reconstruction")


def _domain(args, test_id):
    if args.config is not None:
        values = load_config(args.config)
        return domain_from_mapping(values), values
    return experiments.benchmark_domain(test_id, full_scale=args.full_scale), None


def _solver_config(values):
    if values is None:
        return solver.SolverConfig()
    return solver.SolverConfig(eps1=float(values["eps1"]), eps2=float(values["eps2"]))


def cmd_run(args):
    config, values = _domain(args, args.test)
    res = experiments.run_test(
        args.test, method=args.method, noise=args.noise, seed=args.seed,
        config=config, out_dir=args.out_dir / f"test{args.test}_{args.method}",
        solver_config=_solver_config(values),
        smooth_coefficients=args.smooth_coefficients, keep_images=False)
    rows = experiments.comparison_rows(res)
    print(experiments.format_summary(rows))
    print(f"relative L2 error: raw {res.rel_l2_raw:.4f}, "
          f"post-processed {res.rel_l2_post:.4f}  ({res.runtime:.1f} s)")
    return 0


def cmd_compare(args):
    config, values = _domain(args, args.test)
    out = args.out_dir / f"compare_test{args.test}.csv"
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows = experiments.compare_methods(
        args.test, noise=args.noise, seed=args.seed, config=config,
        solver_config=_solver_config(values), out_path=out,
        smooth_coefficients=args.smooth_coefficients)
    print(experiments.format_summary(rows))
    print(f"wrote {out}")
    return 0


def cmd_theory(args):
    args.out_dir.mkdir(parents=True, exist_ok=True)
    y, ws = theory.random_admissible_polynomials(a=1.0, b=3.0, count=100, seed=args.seed)
    entries = [theory.carleman_check(y, w, lam)
               for w in ws for lam in (1.0, 2.0, 5.0, 10.0)]
    report = theory.CarlemanReport(entries)
    report.to_csv(args.out_dir / "carleman.csv")
    print(report.summary())

    table = theory.convergence_study(args.test, deltas=[0.04, 0.02, 0.01],
                                     seed=args.seed)
    table.to_csv(args.out_dir / "convergence.csv")
    print(table.summary())
    ok = report.all_nonnegative() and "PASS" in table.summary()
    return 0 if ok else 1


def cmd_all(args):
    rows = []
    for test_id in (1, 2, 3, 4):
        config, values = _domain(args, test_id)
        for method, noise in (("fbp", 0.05), ("qrm", 0.05), ("qrm", 0.15)):
            res = experiments.run_test(
                test_id, method=method, noise=noise, seed=args.seed, config=config,
                out_dir=args.out_dir / f"test{test_id}_{method}_n{int(noise * 100)}",
                solver_config=_solver_config(values),
                smooth_coefficients=args.smooth_coefficients, keep_images=False)
            rows.extend(experiments.comparison_rows(res))
            print(f"test {test_id} {method} {int(noise * 100)}%: "
                  f"rel L2 raw {res.rel_l2_raw:.3f} ({res.runtime:.1f} s)")
    experiments.write_comparison_csv(args.out_dir / "summary.csv", rows)
    print(experiments.format_summary(rows))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qrtomo",
        description="Incomplete-data tomography: transport-PDE least-squares "
                    "reconstruction and a zero-filled FBP baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one (test, method, noise) run")
    p_run.add_argument("--test", type=int, choices=(1, 2, 3, 4), default=1)
    p_run.add_argument("--method", choices=("qrm", "fbp"), default="qrm")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="both methods on identical data")
    p_cmp.add_argument("--test", type=int, choices=(1, 2, 3, 4), default=1)
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_th = sub.add_parser("theory", help="energy-inequality and noise-rate checks")
    p_th.add_argument("--test", type=int, choices=(1, 2, 3, 4), default=1)
    _add_common(p_th)
    p_th.set_defaults(func=cmd_theory)

    p_all = sub.add_parser("all", help="reproduce tests 1-4 with both methods")
    _add_common(p_all)
    p_all.set_defaults(func=cmd_all)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:           # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
