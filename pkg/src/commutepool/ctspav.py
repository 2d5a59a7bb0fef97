"""Column generation for the commute pooling master problem.

The master couples three variable groups: mini-route selectors X (priced in
by the label engine), edge indicators Y over the filtered day graph (all
present from the start, they carry the objective), and per-node service
times T.  Cover rows tie X to the trips, lazily-grown link rows tie X to Y,
degree and big-M rows make the Y paths schedulable.  Because X columns only
touch cover and link rows, pricing needs just those two dual families.

After pricing runs dry (or a budget ends the loop) the same model is solved
as a MIP over the accumulated pool and the plan is read off the Y edges,
with schedules re-derived by the canonical engine rather than trusted from
the MIP's T values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import model
from .feasibility import (AVRoute, MiniRoute, RouteSchedule, feasible_av_route,
                          sequence_distance)
from .network import MasterGraph, build_all_pricing_graphs, build_master_graph
from .pricing import PricingDuals, price_all
from .simplex import EQ, GE, LE
from .solver import LinearModel, Solution, get_backend

Edge = Tuple[int, int]

#: multiplier on the worst-case plan distance that prices one vehicle in
#: the lexicographic objective
LEX_WEIGHT = 100


def plan_distance_bound(inst: model.Instance, graph: MasterGraph) -> int:
    """Upper bound on the total distance of any plan on this graph.

    Every trip node contributes at most its most expensive out-edge, and at
    most 2n vehicles each pay one depot-out edge.
    """
    n = inst.n
    total = 0
    worst_depot = 0
    for (u, v) in graph.edges:
        if u == model.START_DEPOT:
            worst_depot = max(worst_depot, inst.sigma(u, v))
    per_node: Dict[int, int] = {}
    for (u, v) in graph.edges:
        if u != model.START_DEPOT:
            s = inst.sigma(u, v)
            if s > per_node.get(u, -1):
                per_node[u] = s
    total = sum(per_node.values()) + 2 * n * worst_depot
    return total


def edge_costs(inst: model.Instance, graph: MasterGraph,
               objective: str) -> Tuple[Dict[Edge, int], Optional[int]]:
    """Objective coefficients per edge; also the distance bound for "lex"."""
    if objective not in ("lex", "distance"):
        raise ValueError(f"objective must be 'lex' or 'distance', got {objective!r}")
    costs = {e: inst.sigma(*e) for e in graph.edges}
    if objective == "distance":
        return costs, None
    sigma_hat = plan_distance_bound(inst, graph)
    for e in graph.edges:
        if e[0] == model.START_DEPOT:
            costs[e] += LEX_WEIGHT * sigma_hat
    return costs, sigma_hat


# ---------------------------------------------------------------------------
# master model assembly
# ---------------------------------------------------------------------------

@dataclass
class MasterIndex:
    """Variable/row lookups for one assembled master model."""

    yvar: Dict[Edge, int]
    tvar: Dict[int, int]
    xvar: List[int]
    cover_row: Dict[int, int]
    link_row: Dict[Edge, int]


def build_master_model(inst: model.Instance, graph: MasterGraph,
                       pool: Sequence[MiniRoute], costs: Dict[Edge, int],
                       relax: bool = True) -> Tuple[LinearModel, MasterIndex]:
    n = inst.n
    m = LinearModel("ctspav-master")
    yvar: Dict[Edge, int] = {}
    for e in sorted(graph.edges):
        yvar[e] = m.add_var(f"y_{e[0]}_{e[1]}", cost=costs[e], lb=0, ub=1,
                            integer=not relax)
    tvar: Dict[int, int] = {}
    for v in model.trip_nodes(n):
        a, b = inst.window(v)
        tvar[v] = m.add_var(f"t_{v}", cost=0, lb=a, ub=b)
    xvar = [m.add_var(f"x_{k}", cost=0, lb=0, ub=1, integer=not relax)
            for k in range(len(pool))]

    # one pass over the pool: cover membership and per-edge users
    cover_cols: Dict[int, Dict[int, int]] = {p: {} for p in model.pickups(n)}
    edge_users: Dict[Edge, List[int]] = {}
    for k, mr in enumerate(pool):
        for v in mr.nodes:
            if model.is_pickup(v, n):
                cover_cols[v][xvar[k]] = 1
        for e in zip(mr.nodes, mr.nodes[1:]):
            edge_users.setdefault(e, []).append(xvar[k])

    cover_row: Dict[int, int] = {}
    for p in model.pickups(n):
        cover_row[p] = m.add_row(cover_cols[p], EQ, 1, f"cover_{p}")
    link_row: Dict[Edge, int] = {}
    for e in sorted(edge_users):
        coeffs = {c: 1 for c in edge_users[e]}
        coeffs[yvar[e]] = -1
        link_row[e] = m.add_row(coeffs, LE, 0, f"link_{e[0]}_{e[1]}")

    for v in model.trip_nodes(n):
        m.add_row({yvar[(u, v)]: 1 for u in graph.in_adj[v]}, EQ, 1, f"din_{v}")
        m.add_row({yvar[(v, w)]: 1 for w in graph.out_adj[v]}, EQ, 1, f"dout_{v}")

    # service-time propagation along used edges, waiting allowed only at
    # pickups (arrival into a dropoff is pinned to departure + travel)
    for (u, v) in sorted(graph.trip_edges):
        su, tuv = inst.service(u), inst.tau(u, v)
        a_u, b_u = inst.window(u)
        a_v, b_v = inst.window(v)
        big = max(0, b_u + su + tuv - a_v)
        m.add_row({tvar[u]: 1, tvar[v]: -1, yvar[(u, v)]: big},
                  LE, big - su - tuv, f"tprop_{u}_{v}")
        if model.is_dropoff(v, n):
            bar = max(0, b_v - a_u - su - tuv)
            m.add_row({tvar[u]: 1, tvar[v]: -1, yvar[(u, v)]: -bar},
                      GE, -bar - su - tuv, f"tarr_{u}_{v}")

    for p in model.pickups(n):
        d = model.dropoff_of(p, n)
        m.add_row({tvar[d]: 1, tvar[p]: -1}, LE,
                  inst.ride_limit(p) + inst.service(p), f"ride_{p}")
    return m, MasterIndex(yvar, tvar, xvar, cover_row, link_row)


def initial_pool(inst: model.Instance) -> List[MiniRoute]:
    """One direct mini route per trip; keeps every master feasible."""
    return [MiniRoute((p, model.dropoff_of(p, inst.n)))
            for p in model.pickups(inst.n)]


def mip_graph_restriction(graph: MasterGraph, pool: Sequence[MiniRoute]
                          ) -> MasterGraph:
    """Shrink the edge grid for the integer solve without losing solutions.

    In any integer master solution each covered node's successor is forced
    to its selected column's successor by the link and degree rows, so a
    driven trip edge is either inside some pool column or a chaining move
    (dropoff to pickup) or a depot leg.  Restricting Y to those edges keeps
    every integer solution over the same pool and its optimal value.
    """
    inst = graph.inst
    n = inst.n
    vt = model.end_depot(n)
    allowed: set = set()
    for mr in pool:
        allowed.update(zip(mr.nodes, mr.nodes[1:]))
    for (u, v) in graph.edges:
        if u == model.START_DEPOT or v == vt:
            allowed.add((u, v))
        elif model.is_dropoff(u, n) and model.is_pickup(v, n):
            allowed.add((u, v))
    return MasterGraph(inst=inst, edges=allowed, removed={})


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

@dataclass
class ColGenConfig:
    objective: str = "lex"                  # "lex" | "distance"
    backend: Optional[str] = None           # None -> $COMMUTEPOOL_BACKEND
    max_iterations: int = 400
    time_limit_s: Optional[float] = None    # pricing loop budget
    mip_time_limit_s: Optional[float] = None
    columns_per_iteration: int = 400
    early_stop: bool = False                # stop once ceil(z_rmp)-z_lb < 1
    use_dti: bool = True
    use_dominance: bool = True
    skip_mip: bool = False                  # relaxation + bound only


@dataclass
class PlannedRoute:
    nodes: Tuple[int, ...]
    starts: Tuple[int, ...]
    depot_departure_s: int
    depot_return_s: int
    mini_routes: Tuple[Tuple[int, ...], ...]
    distance_m: int


@dataclass
class CtspavResult:
    objective: str
    status: str               # optimal | feasible | limit | infeasible
    converged: bool           # pricing ran dry
    iterations: int
    pool_size: int
    z_rmp: Optional[object]
    z_lb: Optional[object]
    z_mip: Optional[object]
    vc: Optional[int] = None
    distance_m: Optional[int] = None
    vc_lb: Optional[int] = None
    gap: Optional[float] = None
    sigma_hat: Optional[int] = None
    routes: List[PlannedRoute] = field(default_factory=list)
    trace: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


def _exact(v) -> Fraction:
    """Backend rational -> Fraction on python ints (see snap_dual)."""
    f = Fraction(v)
    return Fraction(int(f.numerator), int(f.denominator))


def _jsonable(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return v
    if v is None or isinstance(v, (int, str)):
        return v
    f = Fraction(v)
    return int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _ceil(v) -> int:
    if isinstance(v, float):
        return math.ceil(v - 1e-6)
    return math.ceil(Fraction(v))


def split_into_minis(seq: Sequence[int], n: int) -> List[Tuple[int, ...]]:
    """Cut a vehicle path at its empty points; each piece is one mini route."""
    out: List[Tuple[int, ...]] = []
    cur: List[int] = []
    aboard: set = set()
    for v in seq:
        cur.append(v)
        if model.is_pickup(v, n):
            aboard.add(v)
        else:
            aboard.discard(model.pickup_of(v, n))
        if not aboard:
            out.append(tuple(cur))
            cur = []
    if cur:
        raise ValueError(f"path ends with riders aboard: {seq}")
    return out


def _routes_from_edges(active: List[Edge], inst: model.Instance) -> List[Tuple[int, ...]]:
    n = inst.n
    end = model.end_depot(n)
    succ: Dict[int, int] = {}
    heads: List[int] = []
    for (u, v) in active:
        if u == model.START_DEPOT:
            heads.append(v)
        else:
            if u in succ:
                raise ValueError(f"node {u} has two successors")
            succ[u] = v
    routes = []
    seen: set = set()
    for h in sorted(heads):
        seq = [h]
        while seq[-1] != end:
            seq.append(succ[seq[-1]])
        seq.pop()
        routes.append(tuple(seq))
        seen.update(seq)
    want = set(model.trip_nodes(n))
    if seen != want:
        raise ValueError(f"plan misses nodes {sorted(want - seen)}")
    return routes


def _extract_plan(inst: model.Instance, x: Sequence, idx: MasterIndex,
                  tol: float = 0.5) -> List[PlannedRoute]:
    active = [e for e, j in idx.yvar.items() if float(x[j]) > tol]
    planned = []
    for seq in _routes_from_edges(active, inst):
        minis = split_into_minis(seq, inst.n)
        sched = feasible_av_route([MiniRoute(mr) for mr in minis], inst)
        if sched is None:
            raise RuntimeError(f"master emitted an unschedulable route {seq}")
        planned.append(PlannedRoute(sched.nodes, sched.starts,
                                    sched.depot_departure_s,
                                    sched.depot_return_s, tuple(minis),
                                    sequence_distance(seq, inst)))
    return planned


def solve_ctspav(inst: model.Instance,
                 config: Optional[ColGenConfig] = None) -> CtspavResult:
    cfg = config or ColGenConfig()
    backend = get_backend(cfg.backend)
    graph = build_master_graph(inst)
    costs, sigma_hat = edge_costs(inst, graph, cfg.objective)
    pricing_graphs = build_all_pricing_graphs(inst)
    pool = initial_pool(inst)
    known = {mr.nodes for mr in pool}
    n = inst.n

    t0 = time.perf_counter()
    trace: List[dict] = []
    z_rmp = None
    z_lb = None
    converged = False
    last_lp: Optional[Solution] = None
    iters = 0

    for it in range(cfg.max_iterations):
        iters = it + 1
        lp_model, idx = build_master_model(inst, graph, pool, costs, relax=True)
        res = backend.solve_lp(lp_model)
        if not res.ok:
            return CtspavResult(cfg.objective, "infeasible", False, iters,
                                len(pool), None, None, None,
                                sigma_hat=sigma_hat, trace=trace)
        last_lp, last_idx = res, idx
        z_rmp = _exact(res.objective) if backend.exact else res.objective
        pi = {p: res.duals[r] for p, r in idx.cover_row.items()}
        mu = {e: res.duals[r] for e, r in idx.link_row.items()}
        duals = PricingDuals.snapped(pi, mu)
        negative, cbar = price_all(inst, pricing_graphs, duals,
                                   use_dti=cfg.use_dti,
                                   use_dominance=cfg.use_dominance)
        bound = z_rmp + 2 * n * min(0, cbar) if backend.exact else \
            float(z_rmp) + 2 * n * min(0.0, float(cbar))
        if z_lb is None or bound > z_lb:
            z_lb = bound
        fresh = [r for r in negative if r.nodes not in known]
        fresh = fresh[:cfg.columns_per_iteration]
        trace.append({"iter": it, "z_rmp": _jsonable(z_rmp),
                      "cbar": _jsonable(cbar), "z_lb": _jsonable(z_lb),
                      "new_columns": len(fresh), "pool": len(pool),
                      "wall_ms": round(1000 * (time.perf_counter() - t0), 3)})
        if not fresh:
            # nothing new to add: with an exact backend this means pricing
            # ran dry; with floats it may be terminal stalling, same exit
            converged = cbar >= 0
            break
        for r in fresh:
            pool.append(MiniRoute(r.nodes))
            known.add(r.nodes)
        if cfg.early_stop and _ceil(z_rmp) - z_lb < 1:
            break
        if cfg.time_limit_s is not None and \
                time.perf_counter() - t0 > cfg.time_limit_s:
            break

    result = CtspavResult(cfg.objective, "feasible", converged, iters,
                          len(pool), z_rmp, z_lb, None,
                          sigma_hat=sigma_hat, trace=trace)
    if cfg.skip_mip:
        result.status = "limit"
        return result

    mip_model, idx = build_master_model(inst, mip_graph_restriction(graph, pool),
                                        pool, costs, relax=False)
    mres = backend.solve_mip(mip_model, time_limit_s=cfg.mip_time_limit_s)
    if not mres.ok:
        result.status = mres.status
        return result
    result.status = "optimal" if (converged and mres.status == "optimal") \
        else "feasible"
    result.z_mip = _exact(mres.objective) if backend.exact else mres.objective
    result.routes = _extract_plan(inst, mres.x, idx)
    result.vc = len(result.routes)
    result.distance_m = sum(r.distance_m for r in result.routes)

    # cross-check the objective against the re-derived plan
    if cfg.objective == "lex":
        want = result.vc * LEX_WEIGHT * sigma_hat + result.distance_m
    else:
        want = result.distance_m
    drift = abs(float(mres.objective) - want)
    if backend.exact and drift != 0:
        raise RuntimeError(f"plan/objective mismatch: {mres.objective} vs {want}")
    if drift > 1e-4 * max(1.0, abs(want)):
        raise RuntimeError(f"plan drifted from MIP objective: "
                           f"{mres.objective} vs {want}")

    # relaxation-side quality numbers
    zref = z_rmp if converged else z_lb
    if zref is not None and float(result.z_mip) != 0:
        result.gap = max(0.0, (float(result.z_mip) - float(zref))
                         / float(result.z_mip))
    if converged and last_lp is not None:
        if backend.exact:
            flow = sum(_exact(last_lp.x[last_idx.yvar[e]])
                       for e in graph.depot_out_edges())
        else:
            flow = Fraction(sum(float(last_lp.x[last_idx.yvar[e]])
                                for e in graph.depot_out_edges())
                            ).limit_denominator(10**6)
        result.vc_lb = _ceil(flow) if flow > 0 else 0
    elif cfg.objective == "lex" and z_lb is not None:
        # z_lb <= vc*W*sigma_hat + dist and dist <= sigma_hat
        if backend.exact:
            quot = (_exact(z_lb) - sigma_hat) / (LEX_WEIGHT * sigma_hat)
        else:
            quot = (float(z_lb) - sigma_hat) / (LEX_WEIGHT * sigma_hat)
        result.vc_lb = max(0, _ceil(quot))
    return result
