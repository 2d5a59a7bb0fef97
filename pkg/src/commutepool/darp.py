"""Whole-route baseline: set covering over depot-to-depot columns.

This procedure prices entire vehicle routes on the day graph instead of
mini routes, so its columns may interleave pickups and dropoffs of
different riders and, during pricing, revisit a node (relaxed
elementarity, two visits per node at most).  The lexicographic variant
runs a vehicle-count phase first, pins the rounded-up LP value as the
fleet size, then minimises distance under that pin; the final MIP answer
is repaired into disjoint elementary routes.

Label feasibility uses forward necessary conditions (earliest arrivals,
capacity, travel-sum ride bounds), and that label universe is the one the
restricted LP, its convergence test, and the Farley/Lasdon bounds all
refer to.  The exact difference-constraint scheduler then gates which
columns the final MIP may select, so the plan side only ever sees
sequences that truly admit a schedule and repair never meets an
unschedulable route.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import model
from .feasibility import RouteSchedule, feasible_sequence_exact, sequence_distance
from .network import MasterGraph, build_master_graph
from .pricing import snap_dual
from .simplex import EQ, GE
from .solver import LinearModel, get_backend

Edge = Tuple[int, int]


@dataclass(frozen=True)
class DarpColumn:
    """One priced vehicle route; ``nodes`` excludes the depots."""

    nodes: Tuple[int, ...]
    distance_m: int

    def visit_counts(self, n: int) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for v in self.nodes:
            if model.is_pickup(v, n):
                out[v] = out.get(v, 0) + 1
        return out


def make_column(nodes: Sequence[int], inst: model.Instance) -> DarpColumn:
    return DarpColumn(tuple(nodes), sequence_distance(nodes, inst))


def initial_columns(inst: model.Instance) -> List[DarpColumn]:
    return [make_column((p, model.dropoff_of(p, inst.n)), inst)
            for p in model.pickups(inst.n)]


# ---------------------------------------------------------------------------
# pricing
# ---------------------------------------------------------------------------

def darp_edge_costs(inst: model.Instance, graph: MasterGraph,
                    alpha: Dict[int, Fraction], phase: str) -> Dict[Edge, Fraction]:
    """Reduced-cost contribution of each edge.

    Vehicle-count phase: the depot-out edge carries the route cost of 1 and
    pickups rebate their cover dual.  Distance phase: every edge carries its
    length, pickups rebate the dual; the fleet-pin dual is charged once per
    path by the caller.
    """
    if phase not in ("count", "distance"):
        raise ValueError(f"unknown phase {phase!r}")
    n = inst.n
    costs: Dict[Edge, Fraction] = {}
    zero = Fraction(0)
    for (u, v) in graph.edges:
        if phase == "count":
            c = Fraction(1) if u == model.START_DEPOT else zero
        else:
            c = Fraction(inst.sigma(u, v))
        if model.is_pickup(u, n):
            c = c - alpha.get(u, zero)
        costs[(u, v)] = c
    return costs


@dataclass(eq=False)
class _DLabel:
    node: int
    cost: Fraction
    time: int
    aboard: Tuple[Tuple[int, int], ...]    # sorted (rider pickup, travel acc)
    visits: Tuple[Tuple[int, int], ...]    # sorted (node, count)
    pred: Optional["_DLabel"]

    def path(self) -> Tuple[int, ...]:
        out = []
        lab: Optional[_DLabel] = self
        while lab is not None:
            out.append(lab.node)
            lab = lab.pred
        return tuple(reversed(out))


def _dom_key(lab: _DLabel) -> Tuple:
    return (lab.node, lab.visits, tuple(r for r, _ in lab.aboard))


def _dominates(a: _DLabel, b: _DLabel) -> bool:
    if a.cost > b.cost or a.time > b.time:
        return False
    # aboard tuples share the rider order (same key), so zip aligns riders
    return all(aa <= ba for (_, aa), (_, ba) in zip(a.aboard, b.aboard))


def darp_price(inst: model.Instance, graph: MasterGraph,
               costs: Dict[Edge, Fraction], path_offset: Fraction = Fraction(0),
               max_visits: int = 2, label_cap: Optional[int] = None,
               ) -> Tuple[List[Tuple[Fraction, Tuple[int, ...]]],
                          Optional[Fraction], bool]:
    """Least-reduced-cost route search from depot to depot.

    Returns the completed (cost, interior-path) pairs with negative cost,
    sorted, the minimum completed cost before the exact-schedule filter,
    and whether the search ran to exhaustion.  ``path_offset`` is added to
    every completed path (the fleet-pin dual in the distance phase); when
    ``label_cap`` trips, the search stops early and the minimum is no
    longer a certified bound.
    """
    n = inst.n
    end = model.end_depot(n)
    root = _DLabel(model.START_DEPOT, Fraction(0), 0, (), (), None)
    store: Dict[Tuple, List[_DLabel]] = {}
    queue: List[_DLabel] = [root]
    done: List[Tuple[Fraction, Tuple[int, ...]]] = []
    best: Optional[Fraction] = None
    created = 0
    complete = True

    while queue:
        if label_cap is not None and created > label_cap:
            complete = False
            break
        lab = queue.pop()
        u = lab.node
        if u != model.START_DEPOT and lab not in store.get(_dom_key(lab), []):
            continue                      # dominated while waiting in queue
        su = inst.service(u)
        for v in graph.out_adj[u]:
            leg = su + inst.tau(u, v)
            cost = lab.cost + costs[(u, v)]
            if v == end:
                if lab.aboard:
                    continue
                total = cost + path_offset
                if total < 0:
                    done.append((total, lab.path()[1:]))
                if best is None or total < best:
                    best = total
                continue
            a_v, b_v = inst.window(v)
            t = max(a_v, lab.time + leg)
            if t > b_v:
                continue
            aboard = [(r, acc + leg) for r, acc in lab.aboard]
            if any(acc > inst.ride_limit(r) for r, acc in aboard):
                continue
            if model.is_pickup(v, n):
                if any(r == v for r, _ in aboard):
                    continue              # rider already aboard
                if len(aboard) >= inst.capacity:
                    continue
                aboard.append((v, -inst.service(v)))
            else:
                hit = [i for i, (r, _) in enumerate(aboard)
                       if r == model.pickup_of(v, n)]
                if not hit:
                    continue
                aboard.pop(hit[0])
            counts = dict(lab.visits)
            counts[v] = counts.get(v, 0) + 1
            if counts[v] > max_visits:
                continue
            nxt = _DLabel(v, cost, t, tuple(sorted(aboard)),
                          tuple(sorted(counts.items())), lab)
            key = _dom_key(nxt)
            bucket = store.setdefault(key, [])
            if any(_dominates(old, nxt) for old in bucket):
                continue
            bucket[:] = [old for old in bucket if not _dominates(nxt, old)]
            bucket.append(nxt)
            queue.append(nxt)
            created += 1

    done.sort(key=lambda cp: (cp[0], cp[1]))
    return done, best, complete


# ---------------------------------------------------------------------------
# master assembly
# ---------------------------------------------------------------------------

def build_darp_model(inst: model.Instance, pool: Sequence[DarpColumn],
                     phase: str, count_fix: Optional[int] = None,
                     relax: bool = True) -> Tuple[LinearModel, Dict[int, int], Optional[int]]:
    n = inst.n
    m = LinearModel("darp-master")
    for k, col in enumerate(pool):
        c = 1 if phase == "count" else col.distance_m
        # the LP must not cap columns at 1: a bound dual would hide
        # negative reduced costs from pricing and stall convergence
        m.add_var(f"x_{k}", cost=c, lb=0,
                  ub=None if relax else 1, integer=not relax)
    cover_row: Dict[int, int] = {}
    for p in model.pickups(n):
        coeffs = {}
        for k, col in enumerate(pool):
            a = col.visit_counts(n).get(p, 0)
            if a:
                coeffs[k] = a
        cover_row[p] = m.add_row(coeffs, GE, 1, f"cover_{p}")
    count_row = None
    if count_fix is not None:
        count_row = m.add_row({k: 1 for k in range(len(pool))}, EQ,
                              count_fix, "fleet")
    return m, cover_row, count_row


def farley_bound(dual_objective, cbar) -> Fraction:
    """Dual bound for the unit-cost covering phase: dualobj / (1 - min rc)."""
    c = min(Fraction(0), Fraction(cbar))
    return Fraction(dual_objective) / (1 - c)


class _Stabilizer:
    """Running-mean dual center blended with the fresh optimum.

    Neither backend exposes an interior dual point, so the documented
    fallback keeps the average of all optimal dual vectors seen so far and
    prices at weight*center + (1-weight)*current.
    """

    def __init__(self, weight: float):
        self.weight = Fraction(weight).limit_denominator(1000)
        self.center: Dict[int, Fraction] = {}
        self.count = 0

    def push(self, alpha: Dict[int, Fraction]) -> Dict[int, Fraction]:
        self.count += 1
        k = Fraction(1, self.count)
        for p, v in alpha.items():
            old = self.center.get(p, Fraction(0))
            self.center[p] = old + (v - old) * k
        w = self.weight
        if w == 0:
            return dict(alpha)
        return {p: w * self.center[p] + (1 - w) * alpha[p] for p in alpha}


# ---------------------------------------------------------------------------
# repair
# ---------------------------------------------------------------------------

def repair_routes(routes: Sequence[Sequence[int]],
                  inst: model.Instance) -> List[Tuple[int, ...]]:
    """Make selected covering routes disjoint and elementary.

    First occurrences win inside a route; across routes a multi-covered
    rider stays in the route that departs for them earliest (route index
    breaks ties) and the rider's pair is deleted everywhere else.  Dropping
    stops never lengthens a route, so distance cannot increase.
    """
    n = inst.n
    dedup: List[List[int]] = []
    for seq in routes:
        seen: set = set()
        keep = []
        for v in seq:
            if v not in seen:
                seen.add(v)
                keep.append(v)
        dedup.append(keep)

    first_depart: List[Dict[int, int]] = []
    for seq in dedup:
        sched = feasible_sequence_exact(seq, inst)
        if sched is None:
            raise RuntimeError(f"selected column fails exact re-check: {seq}")
        first_depart.append({v: sched.starts[i] for i, v in enumerate(seq)})

    owner: Dict[int, int] = {}
    for p in model.pickups(n):
        holders = [i for i, seq in enumerate(dedup) if p in seq]
        if not holders:
            raise RuntimeError(f"pickup {p} uncovered before repair")
        owner[p] = min(holders, key=lambda i: (first_depart[i][p], i))

    out: List[Tuple[int, ...]] = []
    for i, seq in enumerate(dedup):
        keep = [v for v in seq
                if owner[v if model.is_pickup(v, n)
                         else model.pickup_of(v, n)] == i]
        if not keep:
            raise RuntimeError("repair emptied a route; fleet pin broken")
        out.append(tuple(keep))
    return out


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class DarpConfig:
    objective: str = "lex"                  # "lex" | "distance"
    backend: Optional[str] = None
    max_iterations: int = 400
    time_limit_s: Optional[float] = None    # whole-run budget, split 75/25
    mip_time_limit_s: Optional[float] = None
    stabilization_weight: float = 0.5
    columns_per_iteration: int = 200
    early_stop_distance: bool = False       # dual-bound test in phase two
    label_cap: Optional[int] = 200_000
    max_count_retries: Optional[int] = None


@dataclass
class DarpResult:
    objective: str
    status: str
    converged: bool                         # distance-phase pricing ran dry
    count_converged: bool
    iterations: int
    pool_size: int
    chi: Optional[int]                      # pinned fleet size (lex only)
    z_count_rmp: Optional[Fraction]
    farley_lb: Optional[Fraction]
    z_rmp: Optional[Fraction]
    z_lb: Optional[Fraction]
    z_mip: Optional[object] = None
    vc: Optional[int] = None
    distance_m: Optional[int] = None
    routes: List[RouteSchedule] = field(default_factory=list)
    repair_moves: int = 0
    trace: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


def _exact(v) -> Fraction:
    f = Fraction(v)
    return Fraction(int(f.numerator), int(f.denominator))


def _frac(v, exact: bool) -> Fraction:
    return _exact(v) if exact else snap_dual(float(v))


def _jsonable(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def solve_darp(inst: model.Instance,
               config: Optional[DarpConfig] = None) -> DarpResult:
    cfg = config or DarpConfig()
    if cfg.objective not in ("lex", "distance"):
        raise ValueError(f"objective must be 'lex' or 'distance', got {cfg.objective!r}")
    backend = get_backend(cfg.backend)
    graph = build_master_graph(inst)
    n = inst.n
    pool: List[DarpColumn] = initial_columns(inst)
    schedulable: List[bool] = [True] * len(pool)
    known = {c.nodes for c in pool}
    trace: List[dict] = []
    t0 = time.perf_counter()
    colgen_deadline = None
    if cfg.time_limit_s is not None:
        colgen_deadline = t0 + 0.75 * cfg.time_limit_s
    iters = 0

    def out_of_time() -> bool:
        return colgen_deadline is not None and time.perf_counter() > colgen_deadline

    def take_fresh(found, cap):
        out = []
        for _, nodes in found:
            if nodes in known:
                continue
            out.append(make_column(nodes, inst))
            known.add(nodes)
            if len(out) >= cap:
                break
        return out

    def absorb(fresh):
        for col in fresh:
            pool.append(col)
            schedulable.append(
                feasible_sequence_exact(col.nodes, inst, max_visits=2)
                is not None)

    def run_phase(phase: str, count_fix: Optional[int]):
        """Generate columns until exhaustion or budget; returns the summary."""
        nonlocal iters
        stab = _Stabilizer(cfg.stabilization_weight)
        kappa = count_fix if count_fix is not None else 2 * n
        z_rmp = None
        z_lb = None
        converged = False
        for _ in range(cfg.max_iterations):
            iters += 1
            lp_model, cover_row, count_row = build_darp_model(
                inst, pool, phase, count_fix, relax=True)
            res = backend.solve_lp(lp_model)
            if not res.ok:
                return None, None, False     # infeasible pin
            z_rmp = _frac(res.objective, backend.exact)
            alpha = {p: _frac(res.duals[r], backend.exact)
                     for p, r in cover_row.items()}
            beta = _frac(res.duals[count_row], backend.exact) \
                if count_row is not None else Fraction(0)
            alpha_stab = stab.push(alpha)

            def bound_at(a_vec, cbar):
                dual_obj = sum(a_vec.values())
                if phase == "count":
                    return farley_bound(dual_obj, cbar)
                if count_fix is not None:
                    dual_obj += beta * count_fix
                return dual_obj + kappa * min(Fraction(0), cbar)

            costs = darp_edge_costs(inst, graph, alpha_stab, phase)
            found, cbar, full = darp_price(inst, graph, costs,
                                           path_offset=-beta,
                                           label_cap=cfg.label_cap)
            if cbar is None:
                cbar = Fraction(0)
            if full:
                bound = bound_at(alpha_stab, cbar)
                if z_lb is None or bound > z_lb:
                    z_lb = bound
            fresh = take_fresh(found, cfg.columns_per_iteration)
            extra = {}
            if not fresh and cfg.stabilization_weight:
                # mispricing guard: re-run at the raw optimum before
                # declaring the phase converged
                raw_costs = darp_edge_costs(inst, graph, alpha, phase)
                found, cbar_raw, full = darp_price(inst, graph, raw_costs,
                                                   path_offset=-beta,
                                                   label_cap=cfg.label_cap)
                if cbar_raw is None:
                    cbar_raw = Fraction(0)
                extra["cbar_raw"] = _jsonable(cbar_raw)
                if full:
                    bound = bound_at(alpha, cbar_raw)
                    if z_lb is None or bound > z_lb:
                        z_lb = bound
                fresh = take_fresh(found, cfg.columns_per_iteration)
                if not fresh:
                    converged = full and cbar_raw >= 0
            elif not fresh:
                converged = full and cbar >= 0
            trace.append({"phase": phase, "iter": iters,
                          "z_rmp": _jsonable(z_rmp), "cbar": _jsonable(cbar),
                          "z_lb": _jsonable(z_lb),
                          "new_columns": len(fresh), "pool": len(pool),
                          "wall_ms": round(1000 * (time.perf_counter() - t0), 3),
                          **extra})
            if not fresh:
                break
            absorb(fresh)
            if phase == "count" and z_lb is not None \
                    and math.ceil(z_rmp) - z_lb < 1:
                break                        # fleet size already provable
            if phase == "distance" and cfg.early_stop_distance \
                    and z_lb is not None and math.ceil(z_rmp) - z_lb < 1:
                break
            if out_of_time():
                break
        return z_rmp, z_lb, converged

    chi = None
    z_count = None
    farley = None
    count_converged = False
    if cfg.objective == "lex":
        z_count, farley, count_converged = run_phase("count", None)
        chi = math.ceil(z_count)
        retries = cfg.max_count_retries if cfg.max_count_retries is not None \
            else max(0, 2 * n - chi)
        dist_phase = (None, None, False)
        for _ in range(retries + 1):
            dist_phase = run_phase("distance", chi)
            if dist_phase[0] is not None:
                break
            trace.append({"phase": "distance", "event": "pin-relaxed",
                          "chi": chi,
                          "wall_ms": round(1000 * (time.perf_counter() - t0), 3)})
            chi += 1
        z_rmp, z_lb, converged = dist_phase
        if z_rmp is None:
            return DarpResult(cfg.objective, "infeasible", False,
                              count_converged, iters, len(pool), chi,
                              z_count, farley, None, None, trace=trace)
    else:
        z_rmp, z_lb, converged = run_phase("distance", None)

    chi_priced = chi
    mip_budget = cfg.mip_time_limit_s
    if mip_budget is None and cfg.time_limit_s is not None:
        mip_budget = max(1.0, cfg.time_limit_s - (time.perf_counter() - t0))
    # only sequences that truly admit a schedule may reach the plan
    mip_cols = [c for c, ok in zip(pool, schedulable) if ok]
    while True:
        mip_model, _, _ = build_darp_model(inst, mip_cols, "distance", chi,
                                           relax=False)
        mres = backend.solve_mip(mip_model, time_limit_s=mip_budget)
        if mres.ok or chi is None or chi >= 2 * n:
            break
        chi += 1                     # schedulable pool cannot hit this pin
        trace.append({"phase": "mip", "event": "pin-relaxed", "chi": chi})
    if chi != chi_priced:
        z_lb = None                  # phase-two bound was for the old pin

    result = DarpResult(cfg.objective, "infeasible", converged,
                        count_converged, iters, len(pool), chi,
                        z_count, farley, z_rmp, z_lb, trace=trace)
    if not mres.ok:
        result.status = mres.status
        return result

    chosen = [mip_cols[k] for k in range(len(mip_cols))
              if float(mres.x[k]) > 0.5]
    raw_cover = sum(len(c.nodes) for c in chosen)
    repaired = repair_routes([c.nodes for c in chosen], inst)
    result.repair_moves = raw_cover - sum(len(r) for r in repaired)
    schedules = []
    for seq in repaired:
        sched = feasible_sequence_exact(seq, inst)
        if sched is None:
            raise RuntimeError(f"repaired route infeasible: {seq}")
        schedules.append(sched)
    result.routes = schedules
    result.vc = len(schedules)
    result.distance_m = sum(sequence_distance(s.nodes, inst) for s in schedules)
    z_mip = _exact(mres.objective) if backend.exact else mres.objective
    if result.distance_m > z_mip + Fraction(1, 10**6):
        raise RuntimeError("repair increased total distance")
    result.z_mip = z_mip
    result.status = "optimal" if (converged and mres.status == "optimal") \
        else "feasible"
    return result
