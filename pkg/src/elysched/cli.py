"""Command-line entry point: run scenarios, print cost breakdowns,
benchmark fleet sizes and validate scenario files."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .economics import mlcoh
from .electrolyzer import OperatingState
from .oracle import brute_force_dispatch
from .reporting import write_outputs
from .runtime import run_horizon
from .scenario import ScenarioError, load_scenario, scale_fleet

log = logging.getLogger("elysched")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNMET = 2


def _load(path: str, seed):
    sc = load_scenario(path)
    if seed is not None:
        sc = dataclasses.replace(
            sc, solver=dataclasses.replace(sc.solver, seed=seed))
    return sc


def cmd_run(args) -> int:
    sc = _load(args.scenario, args.seed)
    mode = "realtime" if args.timeout_ms is not None else "sim"
    result = run_horizon(sc, mode=mode, timeout_ms=args.timeout_ms)
    written = write_outputs(result, args.out)
    for path in written:
        log.info("wrote %s", path)
    conv = sum(p.converged for p in result.periods)
    print(f"{sc.name}: {conv}/{sc.periods} periods converged, "
          f"{result.total_kg:.4f} kg at {result.mean_mlcoh:.3f} EUR/kg")
    return EXIT_OK if result.all_converged else EXIT_UNMET


def cmd_lcoh(args) -> int:
    sc = _load(args.scenario, None)
    ids = sc.agent_ids()
    if args.module is None:
        pea, fin = sc.fleet[0]
    elif args.module in ids:
        pea, fin = sc.fleet[ids.index(args.module)]
    else:
        print(f"error: unknown module '{args.module}' (have {ids})",
              file=sys.stderr)
        return EXIT_ERROR
    ctx = dataclasses.replace(sc.context(1), c_e=args.price)
    if not pea.op_min <= args.op <= pea.op_max:
        print(f"error: op {args.op} outside [{pea.op_min}, {pea.op_max}]",
              file=sys.stderr)
        return EXIT_ERROR
    costs = mlcoh(args.op, OperatingState.PRODUCTION, False, fin, pea, ctx)
    print(f"module {pea.id} at {args.op:.1f} % load, "
          f"{args.price:.4f} EUR/kWh:")
    print(f"  CapEx (EUR/kg)  {costs.capex_per_kg:6.2f}")
    print(f"  OpEx  (EUR/kg)  {costs.opex_per_kg:6.2f}")
    print(f"  O&M   (EUR/kg)  {costs.om_per_kg:6.2f}")
    print(f"  LCOH  (EUR/kg)  {costs.mlcoh:6.2f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sc = _load(args.scenario, args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'size':>4}  {'conv':>9}  {'iters/period':>12}  "
          f"{'ms/period':>10}  {'recovery':>10}")
    worst = EXIT_OK
    for n in sizes:
        scn = scale_fleet(sc, n, rescale_targets=args.rescale_targets)
        result = run_horizon(scn)
        conv = sum(p.converged for p in result.periods)
        iters = result.total_iterations / scn.periods
        wall = sum(p.wall_time_s for p in result.periods) / scn.periods
        rec = (f"{result.max_recovery_latency_s * 1e3:.1f} ms"
               if result.max_recovery_latency_s > 0 else "-")
        print(f"{n:>4}  {conv:>4}/{scn.periods:<4}  {iters:>12.1f}  "
              f"{wall * 1e3:>10.2f}  {rec:>10}")
        if not result.all_converged:
            worst = EXIT_UNMET
    return worst


def cmd_validate(args) -> int:
    sc = _load(args.scenario, None)
    print(f"{sc.name}: {len(sc.fleet)} modules, {sc.periods} periods, "
          f"{len(sc.faults)} faults - ok")
    if not args.against_oracle:
        return EXIT_OK
    if len(sc.fleet) > 3:
        print("error: oracle comparison needs a fleet of at most 3",
              file=sys.stderr)
        return EXIT_ERROR
    result = run_horizon(sc)
    worst_gap = 0.0
    for p in result.periods:
        admm_cost = sum(r.cost_eur for r in p.records)
        ref = brute_force_dispatch(list(sc.fleet), sc.targets[p.period - 1],
                                   sc.context(p.period),
                                   eps_dem=sc.solver.eps_demand)
        gap = admm_cost / ref.total_cost_eur - 1 if ref.total_cost_eur else 0.0
        worst_gap = max(worst_gap, gap)
        print(f"  period {p.period:>2}: cost {admm_cost:.5f} EUR, "
              f"reference {ref.total_cost_eur:.5f} EUR, gap {gap:+.3%}")
    print(f"worst optimality gap: {worst_gap:+.3%}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="elysched",
        description="Decentralized cost-optimal scheduling for modular "
                    "electrolysis plants")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write results")
    run.add_argument("scenario")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--timeout-ms", type=float, default=None,
                     help="run agents on threads with this wall-clock "
                          "message timeout instead of logical rounds")
    run.set_defaults(fn=cmd_run)

    lcoh = sub.add_parser("lcoh", help="print the cost breakdown of one "
                                       "module at a load point")
    lcoh.add_argument("scenario")
    lcoh.add_argument("--module", default=None, help="module id (default: first)")
    lcoh.add_argument("--op", type=float, default=100.0, help="load in percent")
    lcoh.add_argument("--price", type=float, required=True,
                      help="electricity price in EUR/kWh")
    lcoh.set_defaults(fn=cmd_lcoh)

    bench = sub.add_parser("bench", help="compare fleet sizes")
    bench.add_argument("scenario")
    bench.add_argument("--sizes", default="3,10")
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--rescale-targets", action=argparse.BooleanOptionalAction,
                       default=True,
                       help="scale demand with total fleet capacity")
    bench.set_defaults(fn=cmd_bench)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")
    val.add_argument("--against-oracle", action="store_true",
                     help="compare every period against the brute-force "
                          "dispatcher (fleets of up to 3)")
    val.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ELYSCHED_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
