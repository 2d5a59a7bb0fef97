"""The ``commutepool`` command: pools in, plans and tables out.

Five subcommands cover the workflow: ``generate`` a synthetic pool (and
optionally its clustered parts), ``solve`` it with either procedure,
``sweep`` a service parameter over a grid, ``report`` solved plans into
metrics/cost CSVs plus a plot-ready long table, and ``validate`` any plan
file against its instance.  A JSON or TOML config file can supply
defaults for any flag; explicit flags win.  The LP/MIP backend comes from
``--backend`` or the ``COMMUTEPOOL_BACKEND`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path
from typing import List, Optional

from .ctspav import ColGenConfig, solve_ctspav
from .darp import DarpConfig, solve_darp
from .metrics import CostModel, PlanMetrics, infrastructure_cost, vehicle_cost
from .plans import load_instance, load_plan, validate_plan, write_instance, \
    write_plan
from .scenario import cluster_commuters, generate_synthetic, subinstance, \
    with_depot
from .sweep import sensitivity_sweep, write_sweep_csv

_MODES = {"lex": "lex", "dist": "distance"}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="commutepool",
        description="Commute trip sharing with autonomous vehicles: "
                    "generate, solve, sweep, report, validate.")
    sub = parser.add_subparsers(dest="command", required=True)
    known = {}

    g = sub.add_parser("generate", help="write a synthetic pool instance")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--delta", type=int, default=600,
                   help="time-window slack in seconds")
    g.add_argument("--detour", type=float, default=0.5,
                   help="allowed ride detour ratio")
    g.add_argument("--capacity", type=int, default=4)
    g.add_argument("--inner", type=float, default=500.0)
    g.add_argument("--outer", type=float, default=3000.0)
    g.add_argument("--speed", type=float, default=10.0)
    g.add_argument("--metric", choices=("euclidean", "manhattan"),
                   default="euclidean")
    g.add_argument("--service", type=int, default=0)
    g.add_argument("--depot", choices=("central", "local"), default="central")
    g.add_argument("--name", default=None)
    g.add_argument("--cluster-size", type=int, default=None,
                   help="also write one instance file per cluster")
    g.add_argument("-o", "--output", required=True)

    s = sub.add_parser("solve", help="solve an instance file into a plan")
    s.add_argument("instance")
    s.add_argument("--procedure", choices=("ctspav", "darp"),
                   default="ctspav")
    s.add_argument("--mode", choices=tuple(_MODES), default="lex")
    s.add_argument("--depot", choices=("central", "local"), default=None,
                   help="re-place the depot before solving")
    s.add_argument("--backend", default=None)
    s.add_argument("--time-limit", type=float, default=None)
    s.add_argument("--mip-time-limit", type=float, default=None)
    s.add_argument("--no-trace", action="store_true")
    s.add_argument("-o", "--output", required=True)

    w = sub.add_parser("sweep", help="re-solve across a parameter grid")
    w.add_argument("instance")
    w.add_argument("--param", choices=("delta", "detour"), required=True)
    w.add_argument("--values", required=True,
                   help="comma-separated grid, e.g. 300,600,900")
    w.add_argument("--procedure", choices=("ctspav", "darp"),
                   default="ctspav")
    w.add_argument("--mode", choices=tuple(_MODES), default="lex")
    w.add_argument("--backend", default=None)
    w.add_argument("--time-limit", type=float, default=None)
    w.add_argument("--mip-time-limit", type=float, default=None)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("-o", "--output", required=True)

    r = sub.add_parser("report", help="tabulate plans into CSV")
    r.add_argument("plans", nargs="+")
    r.add_argument("--outdir", required=True)
    r.add_argument("--price", type=float, default=30000.0)
    r.add_argument("--years", default="1,5,10",
                   help="comma-separated cost horizons")

    v = sub.add_parser("validate", help="re-check a plan against its instance")
    v.add_argument("plan")
    v.add_argument("--instance", required=True)

    for name, p in (("generate", g), ("solve", s), ("sweep", w),
                    ("report", r), ("validate", v)):
        p.add_argument("--config", default=None,
                       help="JSON or TOML file with flag defaults")
        known[name] = (p, {a.dest for a in p._actions})
    return parser, known


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _grid(raw) -> list:
    if isinstance(raw, str):
        raw = raw.split(",")
    out = []
    for v in raw:
        try:
            out.append(int(v))
        except (TypeError, ValueError):
            out.append(float(v))
    return out


def _cmd_generate(args) -> int:
    pool = generate_synthetic(
        args.seed, args.n, delta_s=args.delta, detour_ratio=args.detour,
        capacity=args.capacity, inner_m=args.inner, outer_m=args.outer,
        speed_mps=args.speed, metric=args.metric, service_s=args.service,
        depot=args.depot, name=args.name)
    out = Path(args.output)
    write_instance(out, pool)
    print(f"wrote {out} ({pool.n} commuters, depot={args.depot})")
    if args.cluster_size is not None:
        clusters = cluster_commuters(pool.coords[:pool.n], args.cluster_size)
        for k, cl in enumerate(clusters):
            part = out.with_suffix(f".c{k}.json")
            write_instance(part, subinstance(pool, cl, depot=args.depot))
            print(f"wrote {part} ({cl.size} commuters)")
    return 0


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    out = Path(args.output)
    if args.depot is not None:
        inst = with_depot(inst, args.depot)
        derived = out.with_suffix(".instance.json")
        write_instance(derived, inst)
        print(f"wrote {derived} (depot={args.depot})")
    objective = _MODES[args.mode]
    if args.procedure == "ctspav":
        res = solve_ctspav(inst, ColGenConfig(
            objective=objective, backend=args.backend,
            time_limit_s=args.time_limit,
            mip_time_limit_s=args.mip_time_limit))
    else:
        res = solve_darp(inst, DarpConfig(
            objective=objective, backend=args.backend,
            time_limit_s=args.time_limit,
            mip_time_limit_s=args.mip_time_limit))
    write_plan(out, res, inst, with_trace=not args.no_trace)
    print(f"wrote {out}: status={res.status} vehicles={res.vc} "
          f"distance_m={res.distance_m}")
    return 0 if res.ok else 1


def _cmd_sweep(args) -> int:
    inst = load_instance(args.instance)
    cells = sensitivity_sweep(
        inst, args.param, _grid(args.values),
        procedure=args.procedure, objective=_MODES[args.mode],
        backend=args.backend, time_limit_s=args.time_limit,
        mip_time_limit_s=args.mip_time_limit, workers=args.workers)
    write_sweep_csv(cells, args.output)
    bad = sum(1 for c in cells if c.status == "error")
    print(f"wrote {args.output}: {len(cells)} cells, {bad} failed")
    return 0


def _mean(values) -> float:
    return float(statistics.mean(values)) if values else 0.0


def _cmd_report(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    years = _grid(args.years)
    cost_model = CostModel(price=args.price)

    metric_rows, cost_rows, long_rows = [], [], []
    for path in args.plans:
        plan = load_plan(path)
        name = Path(path).stem
        m = PlanMetrics.from_dict(plan["metrics"])
        metric_rows.append({
            "plan": name,
            "instance": plan["instance"]["name"],
            "procedure": plan["procedure"],
            "objective": plan["objective"],
            "status": plan["status"],
            "vehicle_count": m.vehicle_count,
            "vmt_m": m.vmt_m,
            "trips_per_route_mean": m.trips_per_route_mean,
            "trips_per_route_sd": m.trips_per_route_sd,
            "passenger_mean_s": _mean(m.passenger_s),
            "busy_mean_s": _mean(m.busy_s),
            "idle_mean_s": _mean(m.idle_s),
            "no_sharing_vc": m.no_sharing_vc,
            "no_sharing_vmt_m": m.no_sharing_vmt_m,
            "vc_pct_of_no_sharing": 100.0 * m.vehicle_count / m.no_sharing_vc,
            "vmt_pct_of_no_sharing": 100.0 * m.vmt_m / m.no_sharing_vmt_m,
        })
        baseline = PlanMetrics.from_dict({**plan["metrics"],
                                          "vehicle_count": m.no_sharing_vc,
                                          "vmt_m": m.no_sharing_vmt_m})
        for y in years:
            if y >= 1:
                cost_rows.append((name, y, "vehicle",
                                  float(vehicle_cost(m, cost_model, y))))
                cost_rows.append((name, y, "no_sharing_vehicle",
                                  float(vehicle_cost(baseline, cost_model, y))))
            cost_rows.append((name, y, "infrastructure",
                              float(infrastructure_cost(m, cost_model, y))))
            cost_rows.append((name, y, "no_sharing_infrastructure",
                              float(infrastructure_cost(
                                  baseline, cost_model, y,
                                  include_charger=False))))
        pairs = [
            ("vehicle_count", m.vehicle_count),
            ("vmt_m", m.vmt_m),
            ("trips_per_route_mean", m.trips_per_route_mean),
            ("trips_per_route_sd", m.trips_per_route_sd),
            ("passenger_mean_s", _mean(m.passenger_s)),
            ("busy_mean_s", _mean(m.busy_s)),
            ("idle_mean_s", _mean(m.idle_s)),
            ("span_mean_s", _mean(m.span_s)),
            ("vc_pct_of_no_sharing",
             100.0 * m.vehicle_count / m.no_sharing_vc),
            ("vmt_pct_of_no_sharing",
             100.0 * m.vmt_m / m.no_sharing_vmt_m),
        ] + [(f"occupancy_frac_{k + 1}", float(f))
             for k, f in enumerate(m.occupancy_fractions)]
        long_rows += [(name, metric, value) for metric, value in pairs]

    with (outdir / "metrics.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(metric_rows[0]))
        writer.writeheader()
        writer.writerows(metric_rows)
    with (outdir / "costs.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plan", "years", "kind", "dollars"])
        writer.writerows(cost_rows)
    with (outdir / "long.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plan", "metric", "value"])
        writer.writerows(long_rows)
    print(f"wrote {outdir}/metrics.csv, costs.csv, long.csv "
          f"({len(metric_rows)} plans)")
    return 0


def _cmd_validate(args) -> int:
    problems = validate_plan(load_plan(args.plan),
                             load_instance(args.instance))
    if not problems:
        print(f"{args.plan}: OK")
        return 0
    for p in problems:
        print(f"{args.plan}: {p}")
    return 1


_HANDLERS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "validate": _cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser, known = _build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            data = _load_config(args.config)
        except Exception as exc:
            print(f"could not read config {args.config}: {exc}",
                  file=sys.stderr)
            return 2
        section = data.get(args.command, data) if isinstance(data, dict) \
            else data
        sub, dests = known[args.command]
        unknown = set(section) - dests
        if unknown:
            print(f"unknown config keys for {args.command}: "
                  f"{', '.join(sorted(unknown))}", file=sys.stderr)
            return 2
        sub.set_defaults(**section)
        args = parser.parse_args(argv)     # explicit flags still win
    return _HANDLERS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
