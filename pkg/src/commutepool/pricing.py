"""Mini-route pricing by label setting.

Finds negative-reduced-cost mini routes in each rooted pricing graph.  A
path there is always pickups-then-dropoffs (no dropoff-to-pickup edges), so
labels carry the pickup phase's delayed-start bookkeeping exactly:

* ``cap[c]``  latest start of rider c's pickup permitted by the pickup
  windows seen so far (own window enters only once a later pickup exists,
  the final pickup is anchored at its earliest start);
* ``lam[c]``  driving-plus-service offset from c's pickup to the current
  node along the path.

At the first dropoff these collapse into the delayed pickup times
``dly[c] = min(cap[c], t_final - lam[c])`` and every later ride check reads
``t_drop - service - dly[c] <= limit``, which reproduces the canonical
schedule engine decision for block sequences exactly.

Costs are exact: duals are brought onto a common-denominator integer grid
first, so the search itself runs on plain integers.  Before it starts the
per-edge reduced costs pass through a delivery-node cost shift that
enforces the triangle inequality through dropoffs while leaving every
pairing-complete root-to-sink path cost untouched.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import model
from .model import Instance
from .network import SINK, PricingGraph

Edge = Tuple[int, int]

#: duals coming from a float backend are snapped to this grid
DUAL_SNAP = 10 ** 9


def snap_dual(x) -> Fraction:
    """Exact rational view of a dual value (floats snapped at 1e-9).

    Exact inputs pass through losslessly but are rebuilt on python ints:
    a Fraction wrapping gmpy2 components would leak mpz into all later
    arithmetic (math.ceil on such a Fraction yields mpz, which then
    refuses to mix with ordinary Fractions).
    """
    if isinstance(x, float):
        return Fraction(round(x * DUAL_SNAP), DUAL_SNAP)
    f = Fraction(x)
    return Fraction(int(f.numerator), int(f.denominator))


@dataclass
class PricingDuals:
    """Cover duals per pickup node and link duals per master edge."""

    pi: Dict[int, Fraction]
    mu: Dict[Edge, Fraction] = field(default_factory=dict)

    @classmethod
    def snapped(cls, pi: Dict[int, object], mu: Dict[Edge, object]) -> "PricingDuals":
        return cls({k: snap_dual(v) for k, v in pi.items()},
                   {e: snap_dual(v) for e, v in mu.items()})


@dataclass(frozen=True)
class PricedRoute:
    nodes: Tuple[int, ...]
    reduced_cost: Fraction


def route_reduced_cost(nodes: Sequence[int], inst: Instance,
                       duals: PricingDuals) -> Fraction:
    """Reduced cost of a mini-route column: minus covered-pickup duals,
    minus link duals of its internal edges."""
    n = inst.n
    rc = Fraction(0)
    for v in nodes:
        if model.is_pickup(v, n):
            rc -= duals.pi.get(v, Fraction(0))
    for e in zip(nodes, nodes[1:]):
        rc -= duals.mu.get(e, Fraction(0))
    return rc


def edge_reduced_costs(graph: PricingGraph, duals: PricingDuals) -> Dict[Edge, Fraction]:
    """Raw per-edge reduced costs: a pickup's out-edge carries its cover
    dual, every in-graph edge carries its link dual, sink edges are free.

    Numeric type follows the duals; integer duals keep everything integer.
    """
    out: Dict[Edge, Fraction] = {}
    pickups = set(graph.pickups)
    for (u, v) in graph.edges:
        if v == SINK:
            out[(u, v)] = 0
            continue
        c = -duals.mu.get((u, v), 0)
        if u in pickups:
            c = c - duals.pi.get(u, 0)
        out[(u, v)] = c
    return out


def dti_transform(graph: PricingGraph, raw: Dict[Edge, Fraction]
                  ) -> Tuple[Dict[Edge, Fraction], Dict[int, Fraction]]:
    """Shift costs through each delivery node until detours through it can
    never look cheaper than they are.

    Each delivery w gets a constant q_w <= 0; edges leaving w (sink edge
    included) pay -q_w and edges leaving its pickup pay +q_w, so any path
    serving a rider completely is cost-neutral.  Returns (costs, shifts);
    when the triangle inequality already holds all shifts are zero and the
    costs come back unchanged.
    """
    n = graph.inst.n
    out_adj = graph.out_adj
    edges = graph.edges
    q: Dict[int, Fraction] = {}
    for w in graph.dropoffs:
        lo = 0
        for u in graph.pickups + graph.dropoffs:
            if (u, w) not in edges:
                continue
            base = raw[(u, w)]
            for v in out_adj[w]:
                if (u, v) in edges or (v == SINK and (u, SINK) in edges):
                    cand = base + raw[(w, v)] - raw[(u, v)]
                    if cand < lo:
                        lo = cand
        q[w] = lo
    shifted: Dict[Edge, Fraction] = {}
    for (u, v), c in raw.items():
        if u in q:                                 # leaving a delivery
            shifted[(u, v)] = c - q[u]
        else:                                      # leaving a pickup
            shifted[(u, v)] = c + q[model.dropoff_of(u, n)]
    return shifted, q


def dti_violations(graph: PricingGraph, costs: Dict[Edge, Fraction]) -> int:
    """Count triples u -> w -> v (w a delivery) cheaper than the direct edge."""
    bad = 0
    for w in graph.dropoffs:
        for u in graph.pickups + graph.dropoffs:
            if (u, w) not in costs:
                continue
            for v in graph.out_adj[w]:
                if (u, v) in costs and costs[(u, w)] + costs[(w, v)] < costs[(u, v)]:
                    bad += 1
    return bad


# ---------------------------------------------------------------------------
# label setting
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _Label:
    node: int
    cost: Fraction
    time: int
    open: frozenset
    cap: Dict[int, object]           # rider -> window cap (may be None for +inf)
    lam: Dict[int, int]
    dly: Dict[int, int]              # filled once the dropoff phase starts
    in_drops: bool
    pred: Optional["_Label"] = None
    alive: bool = True               # cleared when dominated after queueing

    def path(self) -> Tuple[int, ...]:
        seq: List[int] = []
        lab: Optional[_Label] = self
        while lab is not None:
            seq.append(lab.node)
            lab = lab.pred
        seq.reverse()
        return tuple(seq)


def _beats(a: _Label, b: _Label) -> bool:
    """Dominance between labels already known to share (open, phase)."""
    if a.cost > b.cost or a.time > b.time:
        return False
    if a.in_drops:
        return all(a.dly[c] >= b.dly[c] for c in a.open)
    for c in a.open:
        ac, bc = a.cap[c], b.cap[c]
        if bc is None:
            if ac is not None:
                return False
        elif ac is not None and ac < bc:
            return False
        if a.lam[c] > b.lam[c]:
            return False
    return True


def _dominates(a: _Label, b: _Label) -> bool:
    if a.open != b.open or a.in_drops != b.in_drops:
        return False
    return _beats(a, b)


def price_root(inst: Instance, graph: PricingGraph,
               costs: Dict[Edge, Fraction],
               use_dominance: bool = True) -> List[PricedRoute]:
    """All pairing-complete routes from the root that survive dominance.

    Returns every surviving sink arrival (any sign); callers filter for
    negative reduced costs.  Labels at a node are bucketed by their
    (open riders, phase) key, the only pairs dominance can relate.
    """
    n = inst.n
    windows = graph.windows
    root = graph.root
    capacity = inst.capacity
    is_pick = set(graph.pickups)
    mate = {d: model.pickup_of(d, n) for d in graph.dropoffs}
    limit = inst.ride_limit_s
    svc = {v: inst.service(v) for v in graph.pickups + graph.dropoffs}
    leg_s = {(u, v): svc[u] + inst.tau(u, v)
             for (u, v) in graph.edges if v != SINK}
    a0, b0 = windows[root]
    start = _Label(node=root, cost=0, time=a0,
                   open=frozenset([root]), cap={root: None}, lam={root: 0},
                   dly={}, in_drops=False)
    store: Dict[int, Dict[tuple, List[_Label]]] = \
        {root: {(start.open, False): [start]}}
    queue: List[_Label] = [start]
    done: List[_Label] = []
    while queue:
        lab = queue.pop()
        if not lab.alive:
            continue                               # dominated since queueing
        u = lab.node
        for v in graph.out_adj[u]:
            if v == SINK:
                if not lab.open:
                    done.append(_Label(SINK, lab.cost + costs[(u, SINK)],
                                       lab.time, frozenset(), {}, {}, {},
                                       True, lab))
                continue
            av, bv = windows[v]
            edge_cost = costs[(u, v)]
            leg = leg_s[(u, v)]
            if v in is_pick:
                if v in lab.open or len(lab.open) >= capacity:
                    continue
                t = max(av, lab.time + leg)
                if t > bv:
                    continue
                cap = {}
                lam = {}
                bu = windows[u][1]
                for c in lab.open:                 # leaving u: its window now caps
                    cc = bu - lab.lam[c]
                    old = lab.cap[c]
                    cap[c] = cc if old is None else min(old, cc)
                    lam[c] = lab.lam[c] + leg
                cap[v] = None
                lam[v] = 0
                new = _Label(v, lab.cost + edge_cost, t,
                             lab.open | {v}, cap, lam, {}, False, lab)
            else:
                p = mate[v]
                if p not in lab.open:
                    continue
                t = lab.time + leg
                if t < av or t > bv:
                    continue
                if lab.in_drops:
                    dly = dict(lab.dly)
                else:
                    # u was the final pickup: anchor it, collapse the caps
                    dly = {}
                    for c in lab.open:
                        chain = lab.time - lab.lam[c]
                        cc = lab.cap[c]
                        dly[c] = chain if cc is None else min(cc, chain)
                ride = t - svc[p] - dly.pop(p)
                if ride > limit[p]:
                    continue
                new = _Label(v, lab.cost + edge_cost, t,
                             lab.open - {p}, {}, {}, dly, True, lab)
            bucket = store.setdefault(v, {}).setdefault(
                (new.open, new.in_drops), [])
            if use_dominance:
                if any(_beats(old, new) for old in bucket):
                    continue
                kept = []
                for old in bucket:
                    if _beats(new, old):
                        old.alive = False
                    else:
                        kept.append(old)
                bucket[:] = kept
            bucket.append(new)
            queue.append(new)

    routes = []
    for lab in done:
        nodes = lab.path()[:-1]                    # strip the sink
        routes.append(PricedRoute(nodes, lab.cost))
    routes.sort(key=lambda r: (r.reduced_cost, r.nodes))
    return routes


def price_all(inst: Instance, graphs: Dict[int, PricingGraph],
              duals: PricingDuals, use_dti: bool = True,
              use_dominance: bool = True
              ) -> Tuple[List[PricedRoute], Fraction]:
    """Price every root; returns negative-cost routes and the overall
    minimum reduced cost (any sign).

    Internally all duals move onto their common-denominator integer grid,
    so the search adds and compares plain integers; results are rescaled
    to exact fractions on the way out.
    """
    scale = 1
    for f in itertools.chain(duals.pi.values(), duals.mu.values()):
        scale = math.lcm(scale, Fraction(f).denominator)
    grid = PricingDuals({k: int(v * scale) for k, v in duals.pi.items()},
                        {e: int(v * scale) for e, v in duals.mu.items()})
    negative: List[PricedRoute] = []
    overall = None
    for root in sorted(graphs):
        graph = graphs[root]
        raw = edge_reduced_costs(graph, grid)
        costs = dti_transform(graph, raw)[0] if use_dti else raw
        for route in price_root(inst, graph, costs, use_dominance):
            if overall is None or route.reduced_cost < overall:
                overall = route.reduced_cost
            if route.reduced_cost < 0:
                negative.append(PricedRoute(route.nodes,
                                            Fraction(route.reduced_cost, scale)))
    negative.sort(key=lambda r: (r.reduced_cost, r.nodes))
    if overall is None:
        raise RuntimeError("pricing found no sink route at all")
    return negative, Fraction(overall, scale)
