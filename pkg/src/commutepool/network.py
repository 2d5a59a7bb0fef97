"""Routing graphs and edge filtering.

Two graph families are built here.  The *master graph* spans all 4n trip
nodes plus the two depot copies and underpins the assembly model: its edges
are the candidate vehicle movements.  The *pricing graphs* — one per pickup
node, restricted to that node's travel direction plus a virtual sink — feed
the block search; their edges carry per-iteration reduced costs elsewhere,
only topology and tightened windows are kept here.

Filtering removes edges that provably cannot appear in any feasible route:
depot structure, pairing/precedence, pairwise window arithmetic, ride-limit
arithmetic, and four-node probe routes checked with the schedule engine.
Every removal is tagged with the rule that fired so the brute-force
soundness oracle can point at the exact culprit when something is wrong.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from . import model
from .feasibility import feasible_mini_route, schedule_sequence
from .model import Instance

Edge = Tuple[int, int]

#: virtual sink id used by all pricing graphs
SINK = -1


@dataclass
class MasterGraph:
    inst: Instance
    edges: Set[Edge]
    removed: Dict[Edge, str]                  # edge -> first rule that removed it
    out_adj: Dict[int, list[int]] = field(default_factory=dict)
    in_adj: Dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.out_adj:
            nodes = [model.START_DEPOT] + model.trip_nodes(self.inst.n) \
                + [model.end_depot(self.inst.n)]
            self.out_adj = {v: [] for v in nodes}
            self.in_adj = {v: [] for v in nodes}
            for u, v in sorted(self.edges):
                self.out_adj[u].append(v)
                self.in_adj[v].append(u)

    @property
    def trip_edges(self) -> list[Edge]:
        """Edges between trip nodes (no depot endpoint), sorted."""
        n = self.inst.n
        return sorted(e for e in self.edges
                      if not model.is_depot(e[0], n) and not model.is_depot(e[1], n))

    def depot_out_edges(self) -> list[Edge]:
        return sorted(e for e in self.edges if e[0] == model.START_DEPOT)


@dataclass
class PricingGraph:
    """Topology for the block search rooted at one pickup node."""

    inst: Instance
    root: int
    inbound: bool
    pickups: list[int]
    dropoffs: list[int]
    edges: Set[Edge]                           # includes (dropoff, SINK) edges
    windows: Dict[int, Tuple[int, int]]        # tightened per-root windows
    removed: Dict[Edge, str]
    out_adj: Dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.out_adj:
            self.out_adj = {v: [] for v in self.pickups + self.dropoffs + [SINK]}
            for u, v in sorted(self.edges):
                self.out_adj[u].append(v)


# ---------------------------------------------------------------------------
# master graph
# ---------------------------------------------------------------------------

def _probe_mini(seq, inst) -> bool:
    return feasible_mini_route(seq, inst) is not None


def _probe_chain(seq, inst) -> bool:
    # two direct blocks chained; schedule engine handles the block split
    return schedule_sequence(seq, inst) is not None


def build_master_graph(inst: Instance) -> MasterGraph:
    n = inst.n
    vs, vt = model.START_DEPOT, model.end_depot(n)
    trip = model.trip_nodes(n)
    nodes = [vs] + trip + [vt]

    removed: Dict[Edge, str] = {}
    edges: Set[Edge] = set()
    for u in nodes:
        for v in nodes:
            if u != v:
                edges.add((u, v))

    def drop(u, v, rule):
        e = (u, v)
        if e in edges:
            edges.remove(e)
            removed[e] = rule

    # (a) depot structure: vehicles leave vs for a pickup and reach vt from a
    # dropoff; nothing else touches the depots
    drop(vs, vt, "a")
    drop(vt, vs, "a")
    for v in trip:
        drop(vt, v, "a")
        drop(v, vs, "a")
        if model.is_pickup(v, n):
            drop(v, vt, "a")
        else:
            drop(vs, v, "a")

    # (b) pairing and precedence inside each commuter's 4-node chain
    for c in range(1, n + 1):
        p_in, d_in, p_out, d_out = c, n + c, 2 * n + c, 3 * n + c
        for e in [(p_in, p_out), (p_in, d_out), (d_in, p_in), (d_in, d_out),
                  (p_out, p_in), (p_out, d_in), (d_out, p_in), (d_out, d_in),
                  (d_out, p_out)]:
            drop(*e, "b")
    # structural direction rule: a vehicle can only switch directions between
    # blocks, i.e. on a dropoff -> pickup move
    for u in trip:
        for v in trip:
            if u == v or model.is_inbound(u, n) == model.is_inbound(v, n):
                continue
            if not (model.is_dropoff(u, n) and model.is_pickup(v, n)):
                drop(u, v, "b")

    # (c) window arithmetic on trip-to-trip edges
    for u in trip:
        au = inst.window(u)[0]
        su = inst.service(u)
        for v in trip:
            if u != v and (u, v) in edges and au + su + inst.tau(u, v) > inst.window(v)[1]:
                drop(u, v, "c")

    # (d) inserting j between i and its dropoff would blow i's ride limit
    for i in model.pickups(n):
        ni = model.dropoff_of(i, n)
        li = inst.ride_limit(i)
        for j in trip:
            if j in (i, ni):
                continue
            if inst.tau(i, j) + inst.service(j) + inst.tau(j, ni) > li:
                drop(i, j, "d")
                drop(j, ni, "d")

    # (e) four-node probe routes
    for i in model.pickups(n):
        for j in model.pickups(n):
            if i == j:
                continue
            ni, nj = model.dropoff_of(i, n), model.dropoff_of(j, n)
            same_dir = model.is_inbound(i, n) == model.is_inbound(j, n)
            if same_dir:
                ij_ni_nj = _probe_mini((i, j, ni, nj), inst)
                ij_nj_ni = _probe_mini((i, j, nj, ni), inst)
                ji_ni_nj = _probe_mini((j, i, ni, nj), inst)
                if (i, nj) in edges and not _probe_mini((j, i, nj, ni), inst):
                    drop(i, nj, "e")
                if (i, j) in edges and not (ij_ni_nj or ij_nj_ni):
                    drop(i, j, "e")
                if (ni, nj) in edges and not (ij_ni_nj or ji_ni_nj):
                    drop(ni, nj, "e")
            # chain probe: works across directions too, it is exactly the
            # condition for hooking j's direct block after i's
            if (ni, j) in edges and not _probe_chain((i, ni, j, nj), inst):
                drop(ni, j, "e")

    return MasterGraph(inst=inst, edges=edges, removed=removed)


# ---------------------------------------------------------------------------
# pricing graphs
# ---------------------------------------------------------------------------

def tighten_windows(inst: Instance, root: int) -> Dict[int, Tuple[int, int]]:
    """Per-root lower-bound lift: nothing can be reached sooner than driving
    from the root's earliest departure; dropoffs inherit from their pickup."""
    n = inst.n
    inbound = model.is_inbound(root, n)
    a_root, b_root = inst.window(root)
    s_root = inst.service(root)
    out: Dict[int, Tuple[int, int]] = {root: (a_root, b_root)}
    for u in model.pickups(n, inbound):
        if u == root:
            continue
        a, b = inst.window(u)
        a = max(a, a_root + s_root + inst.tau(root, u))
        out[u] = (a, b)
    for u in model.pickups(n, inbound):
        du = model.dropoff_of(u, n)
        a, b = inst.window(du)
        if u != root:
            au, _ = out[u]
            a = max(a, au + inst.service(u) + inst.tau(u, du))
        out[du] = (a, b)
    return out


@dataclass
class _DirectionRules:
    """Root-independent filter state shared by all same-direction roots.

    Rules (b) except the root's dropoff fan, (d), and (e) never look at the
    root, so their removal masks are computed once per direction; only the
    in-edges of the root (a), that fan (b), and the tightened-window
    arithmetic (c) remain per-root work.  Masks are (m, m+1) booleans over
    local node indices, pickups first, with the sink in the last column.
    """

    nodes: List[int]                      # pickups then dropoffs
    tau: np.ndarray                       # (m, m) node-to-node seconds
    service: np.ndarray                   # (m,)
    b_hi: np.ndarray                      # (m,) window upper bounds
    bmask: np.ndarray
    dmask: np.ndarray
    emask: np.ndarray


def _direction_rules(inst: Instance, inbound: bool) -> _DirectionRules:
    n = inst.n
    picks = model.pickups(n, inbound)
    drops = model.dropoffs(n, inbound)
    nodes = picks + drops                  # local dropoff of pickup k is k+n
    m = 2 * n
    loc = inst.node_location[np.asarray(nodes)]
    tau = inst.tau_s[np.ix_(loc, loc)]
    service = np.array([inst.service(v) for v in nodes], dtype=np.int64)
    b_hi = np.array([inst.window(v)[1] for v in nodes], dtype=np.int64)

    # (b) structural parts: pickups never hit the sink, no dropoff -> pickup
    bmask = np.zeros((m, m + 1), dtype=bool)
    bmask[:n, m] = True
    bmask[n:, :n] = True

    # (d) inserting j between pickup k and its dropoff blows k's ride limit
    dmask = np.zeros((m, m + 1), dtype=bool)
    limits = np.array([inst.ride_limit(p) for p in picks], dtype=np.int64)
    for k in range(n):
        cond = tau[k, :] + service + tau[:, k + n] > limits[k]
        cond[k] = cond[k + n] = False
        dmask[k, :m] |= cond
        dmask[cond, k + n] = True

    # (e) four-node probe routes over ordered pickup pairs
    emask = np.zeros((m, m + 1), dtype=bool)
    for ki, i in enumerate(picks):
        ni = drops[ki]
        for kj, j in enumerate(picks):
            if ki == kj:
                continue
            nj = drops[kj]
            ij_ni_nj = _probe_mini((i, j, ni, nj), inst)
            ij_nj_ni = _probe_mini((i, j, nj, ni), inst)
            ji_ni_nj = _probe_mini((j, i, ni, nj), inst)
            if not _probe_mini((j, i, nj, ni), inst):
                emask[ki, kj + n] = True               # (i, nj)
            if not _probe_chain((i, ni, j, nj), inst):
                emask[ki + n, kj] = True               # (ni, j)
            if not (ij_ni_nj or ij_nj_ni):
                emask[ki, kj] = True                   # (i, j)
            if not (ij_ni_nj or ji_ni_nj):
                emask[ki + n, kj + n] = True           # (ni, nj)

    return _DirectionRules(nodes, tau, service, b_hi, bmask, dmask, emask)


#: removal tag per precedence code; 0 keeps the edge, 6 marks a self loop
_TAG_RULE = np.array(["", "a", "b", "c", "d", "e", ""])


def build_pricing_graph(inst: Instance, root: int,
                        _rules: Optional[_DirectionRules] = None) -> PricingGraph:
    n = inst.n
    if not model.is_pickup(root, n):
        raise ValueError(f"pricing root {root} is not a pickup node")
    inbound = model.is_inbound(root, n)
    rules = _rules if _rules is not None else _direction_rules(inst, inbound)
    nodes = rules.nodes
    m = 2 * n
    k_root = nodes.index(root)
    windows = tighten_windows(inst, root)

    # (a) nothing re-enters the root; (b) adds the root's fan to foreign
    # dropoffs; (c) is window arithmetic on the per-root lifted lower bounds
    amask = np.zeros((m, m + 1), dtype=bool)
    amask[:, k_root] = True
    broot = np.zeros((m, m + 1), dtype=bool)
    broot[k_root, n:m] = True
    broot[k_root, k_root + n] = False
    a_lo = np.array([windows[v][0] for v in nodes], dtype=np.int64)
    cmask = np.zeros((m, m + 1), dtype=bool)
    cmask[:, :m] = (a_lo + rules.service)[:, None] + rules.tau > rules.b_hi[None, :]

    # lowest-numbered rule wins the tag, reproducing sequential application
    tag = np.zeros((m, m + 1), dtype=np.uint8)
    for code, mask in ((5, rules.emask), (4, rules.dmask), (3, cmask),
                       (2, rules.bmask | broot), (1, amask)):
        tag[mask] = code
    np.fill_diagonal(tag[:, :m], 6)

    ids = np.asarray(nodes + [SINK])
    keep = np.nonzero(tag == 0)
    edges = set(zip(ids[keep[0]].tolist(), ids[keep[1]].tolist()))
    gone = np.nonzero((tag >= 1) & (tag <= 5))
    removed = dict(zip(zip(ids[gone[0]].tolist(), ids[gone[1]].tolist()),
                       _TAG_RULE[tag[gone]].tolist()))

    return PricingGraph(inst=inst, root=root, inbound=inbound,
                        pickups=model.pickups(n, inbound),
                        dropoffs=model.dropoffs(n, inbound), edges=edges,
                        windows=windows, removed=removed)


def build_all_pricing_graphs(inst: Instance) -> Dict[int, PricingGraph]:
    out: Dict[int, PricingGraph] = {}
    for inbound in (True, False):
        rules = _direction_rules(inst, inbound)
        for p in model.pickups(inst.n, inbound):
            out[p] = build_pricing_graph(inst, p, _rules=rules)
    return out


# ---------------------------------------------------------------------------
# soundness oracle
# ---------------------------------------------------------------------------

def filter_soundness_oracle(inst: Instance) -> dict:
    """Brute-force check that no removed edge is ever needed.

    Enumerates every feasible mini route and every feasible ordered pair of
    distinct mini routes, collects all edges those use (including depot legs
    and the sink legs of the pricing view), and reports any intersection
    with the removed sets.  Exponential — meant for small instances.
    """
    from .enumeration import all_feasible_mini_routes, feasible_pair_edges

    n = inst.n
    vs, vt = model.START_DEPOT, model.end_depot(n)
    minis = all_feasible_mini_routes(inst)

    used: Set[Edge] = set()
    for mr in minis:
        seq = mr.nodes
        used.add((vs, seq[0]))
        used.add((seq[-1], vt))
        used.update(zip(seq, seq[1:]))
    used.update(feasible_pair_edges(inst, minis))

    master = build_master_graph(inst)
    master_bad = sorted(e for e in used if e in master.removed)

    pricing_bad: list[tuple[int, Edge]] = []
    for root in model.pickups(n):
        g = build_pricing_graph(inst, root)
        rooted = [mr for mr in minis if mr.nodes[0] == root]
        g_used: Set[Edge] = set()
        for mr in rooted:
            g_used.update(zip(mr.nodes, mr.nodes[1:]))
            g_used.add((mr.nodes[-1], SINK))
        for e in sorted(g_used):
            if e in g.removed:
                pricing_bad.append((root, e))

    return {
        "mini_routes": len(minis),
        "master_removed": len(master.removed),
        "master_violations": master_bad,
        "pricing_violations": pricing_bad,
        "ok": not master_bad and not pricing_bad,
    }


def to_dot(graph: MasterGraph | PricingGraph, name: str = "g") -> str:
    """GraphViz dump for eyeballing small graphs."""
    lines = [f"digraph {name} {{"]
    edges = sorted(graph.edges)
    for u, v in edges:
        lines.append(f'  "{u}" -> "{v}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
