"""Plan files: what a solve decided, written down defensibly.

A plan is canonical JSON (sorted keys, no timestamps, no absolute paths)
so that identical runs produce byte-identical files; everything volatile
-- per-iteration wall clock above all -- goes to a trace sidecar the plan
only names.  ``validate_plan`` re-derives schedules, distances, coverage
and metrics from the instance and reports every disagreement instead of
stopping at the first.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace
from typing import List, Optional, Union

from . import model
from .ctspav import CtspavResult
from .darp import DarpResult
from .feasibility import feasible_sequence_exact, sequence_distance
from .metrics import compute_metrics

__all__ = [
    "PLAN_SCHEMA",
    "instance_digest",
    "plan_payload",
    "write_plan",
    "write_instance",
    "load_instance",
    "load_plan",
    "validate_plan",
]

PLAN_SCHEMA = "commutepool-plan@1"
TRACE_SCHEMA = "commutepool-trace@1"


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _num(v):
    """Exact rationals as 'p/q' strings; everything else JSON-native."""
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    try:
        f = Fraction(v)
    except (TypeError, ValueError):
        return str(v)
    return int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def instance_digest(inst: model.Instance) -> str:
    """SHA-256 of the canonical instance JSON, matrices included."""
    text = _canonical(inst.to_dict())
    return hashlib.sha256(text.encode()).hexdigest()


def write_instance(path: Union[str, Path], inst: model.Instance) -> None:
    Path(path).write_text(_canonical(inst.to_dict()))


def load_instance(path: Union[str, Path]) -> model.Instance:
    return model.Instance.from_dict(json.loads(Path(path).read_text()))


def _gap(result) -> Optional[float]:
    """(z_mip - reference) / z_mip with the dual bound standing in when
    column generation did not converge."""
    ref = result.z_rmp if result.converged else result.z_lb
    if result.z_mip is None or ref is None or float(result.z_mip) == 0:
        return None
    return max(0.0, (float(result.z_mip) - float(ref)) / float(result.z_mip))


def _route_entry(route, inst: model.Instance) -> dict:
    dist = getattr(route, "distance_m", None)
    entry = {
        "nodes": list(route.nodes),
        "starts": list(route.starts),
        "depot_departure_s": route.depot_departure_s,
        "depot_return_s": route.depot_return_s,
        "distance_m": dist if dist is not None
        else sequence_distance(route.nodes, inst),
    }
    minis = getattr(route, "mini_routes", None)
    if minis is not None:
        entry["mini_routes"] = [list(mr) for mr in minis]
    return entry


def plan_payload(result, inst: model.Instance,
                 trace_file: Optional[str] = None) -> dict:
    """JSON-ready plan for either procedure's solve result."""
    if isinstance(result, CtspavResult):
        procedure = "ctspav"
        bounds = {
            "z_rmp": _num(result.z_rmp),
            "z_lb": _num(result.z_lb),
            "z_mip": _num(result.z_mip),
            "vc_lb": result.vc_lb,
            "sigma_hat": result.sigma_hat,
            "gap": result.gap,
        }
        extra = {}
    elif isinstance(result, DarpResult):
        procedure = "darp"
        bounds = {
            "z_rmp": _num(result.z_rmp),
            "z_lb": _num(result.z_lb),
            "z_mip": _num(result.z_mip),
            "chi": result.chi,
            "z_count_rmp": _num(result.z_count_rmp),
            "farley_lb": _num(result.farley_lb),
            "gap": _gap(result),
        }
        extra = {"repair_moves": result.repair_moves,
                 "count_converged": result.count_converged}
    else:
        raise TypeError(f"not a solve result: {type(result).__name__}")

    routes = [_route_entry(r, inst) for r in result.routes]
    payload = {
        "schema": PLAN_SCHEMA,
        "instance": {"name": inst.name, "n": inst.n,
                     "digest": instance_digest(inst)},
        "procedure": procedure,
        "objective": result.objective,
        "status": result.status,
        "converged": result.converged,
        "iterations": result.iterations,
        "pool_size": result.pool_size,
        "bounds": bounds,
        "vehicle_count": result.vc,
        "total_distance_m": result.distance_m,
        "routes": routes,
        "metrics": compute_metrics(result, inst).to_dict(),
        "trace_file": trace_file,
        **extra,
    }
    return payload


def write_plan(path: Union[str, Path], result, inst: model.Instance,
               with_trace: bool = True) -> dict:
    """Write the plan and its trace sidecar; returns the plan payload."""
    path = Path(path)
    trace_name = None
    if with_trace:
        trace_name = path.stem + ".trace.json"
        records = [{k: _num(v) for k, v in rec.items()} for rec in result.trace]
        trace = {"schema": TRACE_SCHEMA, "instance": inst.name,
                 "records": records}
        (path.parent / trace_name).write_text(_canonical(trace))
    payload = plan_payload(result, inst, trace_file=trace_name)
    path.write_text(_canonical(payload))
    return payload


def load_plan(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text())


def validate_plan(plan: Union[dict, str, Path],
                  inst: model.Instance) -> List[str]:
    """Re-check a plan against its instance; returns every problem found."""
    if not isinstance(plan, dict):
        plan = load_plan(plan)
    problems: List[str] = []
    if plan.get("schema") != PLAN_SCHEMA:
        return [f"unrecognized plan schema {plan.get('schema')!r}"]
    info = plan.get("instance", {})
    if info.get("digest") != instance_digest(inst):
        problems.append("instance digest does not match the plan")
    n = inst.n
    if info.get("n") != n:
        problems.append(f"plan was made for n={info.get('n')}, instance has {n}")
        return problems

    covered: List[int] = []
    walkable = []
    for k, entry in enumerate(plan.get("routes", [])):
        nodes = tuple(entry["nodes"])
        covered.extend(nodes)
        sched = feasible_sequence_exact(nodes, inst)
        if sched is None:
            problems.append(f"route {k} is not feasible: {nodes}")
            continue
        if tuple(entry["starts"]) != sched.starts:
            problems.append(f"route {k} starts differ from the earliest "
                            f"schedule")
        if entry["depot_departure_s"] != sched.depot_departure_s or \
                entry["depot_return_s"] != sched.depot_return_s:
            problems.append(f"route {k} depot times differ")
        dist = sequence_distance(nodes, inst)
        if entry.get("distance_m", dist) != dist:
            problems.append(f"route {k} distance {entry['distance_m']} != {dist}")
        walkable.append(SimpleNamespace(
            nodes=nodes, starts=tuple(entry["starts"]),
            depot_departure_s=entry["depot_departure_s"],
            depot_return_s=entry["depot_return_s"],
            distance_m=dist))

    want = model.trip_nodes(n)
    if sorted(covered) != want:
        problems.append("trip nodes are not covered exactly once")
    if plan.get("vehicle_count") != len(plan.get("routes", [])):
        problems.append("vehicle_count does not match the route list")
    total = sum(sequence_distance(tuple(e["nodes"]), inst)
                for e in plan.get("routes", []))
    if plan.get("total_distance_m") != total:
        problems.append(f"total_distance_m {plan.get('total_distance_m')} "
                        f"!= {total}")
    if not problems:
        fresh = compute_metrics(walkable, inst).to_dict()
        if plan.get("metrics") != fresh:
            problems.append("stored metrics do not match a recomputation")
    return problems
