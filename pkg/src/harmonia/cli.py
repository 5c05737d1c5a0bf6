"""Command line front end: single runs, result tables, oracle export and
the fast structural self-checks.

Exit codes: 0 on success, 1 on a failed check or empty table, 2 when the
method cannot run on the scenario, 3 when training diverges.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import bench, losses, oracle, scenarios, train


def build_parser():
    p = argparse.ArgumentParser(
        prog="harmonia",
        description="harmonic-network benchmarks against grid oracles")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train one scenario/method/seed pair")
    r.add_argument("--scenario", required=True, choices=scenarios.names())
    r.add_argument("--method", required=True, choices=losses.METHODS)
    r.add_argument("--seed", type=int, required=True)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--fast", action="store_true",
                   help="4000 epochs and small oracle grids")
    g.add_argument("--paper", action="store_true",
                   help="16000 epochs and full grids (the default)")
    r.add_argument("--epochs", type=int, default=None,
                   help="override the preset's epoch count")
    r.add_argument("--out", default="runs", help="output root directory")
    r.add_argument("--width", type=int, default=32)
    r.add_argument("--hidden-layers", type=int, default=3)

    t = sub.add_parser("table", help="aggregate run metrics into a table")
    t.add_argument("--out", default="runs")
    t.add_argument("--scale100", action="store_true",
                   help="scale the printed numbers by 100")

    o = sub.add_parser("oracle", help="export a finite-difference oracle")
    o.add_argument("--scenario", required=True, choices=scenarios.names())
    o.add_argument("--h", type=float, required=True,
                   help="grid spacing; must divide the bounding box")
    o.add_argument("--out", default="runs")

    sub.add_parser("check", help="run the fast structural invariants")
    return p


def _cmd_run(args):
    preset = "fast" if args.fast else "paper"
    res = bench.run(args.scenario, args.method, args.seed, preset=preset,
                    epochs=args.epochs, out_root=args.out, width=args.width,
                    hidden_layers=args.hidden_layers)
    m = res.metrics
    print(f"{res.scenario} / {res.method} / seed {res.seed} "
          f"({res.epochs} epochs, {preset} preset)")
    print(f"  rmse {m.rmse:.6g}  mae {m.mae:.6g}  "
          f"mean|laplacian| {m.mean_abs_laplacian:.6g}  "
          f"final loss {res.final_loss:.6g}")
    if res.paths is not None:
        for i, (pts, status) in enumerate(res.paths):
            print(f"  path {i}: {len(pts)} points, {status}, "
                  f"ends at y={pts[-1, 1]:.3f}")
    print(f"  wall time {res.wall_time:.1f}s")
    print(f"  bundle: {res.out_dir}")
    return 0


def _cmd_table(args):
    rows = bench.collect_runs(args.out)
    if not rows:
        print(f"no runs found under {args.out}", file=sys.stderr)
        return 1
    entries = bench.aggregate(rows)
    path = os.path.join(args.out, "table.csv")
    bench.write_table(entries, path)
    print(bench.format_table(entries, scale100=args.scale100), end="")
    for scen, meth, missed in bench.missing_runs(entries):
        print(f"missing: {scen}/{meth} seeds {missed}")
    print(f"wrote {path}")
    return 0


def _cmd_oracle(args):
    scenario = scenarios.get(args.scenario)
    eps = scenario.dielectric.eps_at if scenario.dielectric else None
    grid = oracle.fd_laplace_solve(scenario.domain, scenario.features,
                                   args.h, eps_fn=eps)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, f"oracle_{scenario.name}")
    oracle.write_grid_text(grid, base + ".txt")
    oracle.write_grid_csv(grid, base + ".csv")
    info = grid.solve_info
    shape = "x".join(str(s) for s in grid.shape)
    print(f"{scenario.name}: {shape} nodes at h={args.h:g}, "
          f"{info.iterations} iterations, residual {info.residual:.3g}, "
          f"omega {info.omega:.4f}")
    print(f"wrote {base}.txt and {base}.csv")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "table":
            return _cmd_table(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return 0 if bench.check() else 1
    except losses.IncompatibleMethod as exc:
        print(f"incompatible: {exc}", file=sys.stderr)
        return 2
    except train.TrainingDiverged as exc:
        print(f"training diverged at epoch {exc.epoch}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
