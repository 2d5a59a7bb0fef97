"""Exhaustive enumeration for small instances.

Everything here is exponential and intended for cross-checking the clever
parts of the package on desk-sized inputs: complete mini-route pools,
complete vehicle-route pools, and provably optimal plans found by dynamic
programming over coverage masks.  The solvers never call into this module.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional, Sequence, Set, Tuple

from . import model
from .feasibility import (AVRoute, MiniRoute, feasible_av_route,
                          feasible_mini_route, sequence_distance)
from .model import Instance

Edge = Tuple[int, int]


def all_feasible_mini_routes(inst: Instance) -> list[MiniRoute]:
    """Every feasible mini route, in deterministic order.

    Tries each ordered pickup tuple of size <= capacity within one travel
    direction, crossed with every dropoff permutation.
    """
    n = inst.n
    out: list[MiniRoute] = []
    for inbound in (True, False):
        picks = model.pickups(n, inbound)
        for k in range(1, min(inst.capacity, n) + 1):
            for p_seq in itertools.permutations(picks, k):
                drops = [model.dropoff_of(p, n) for p in p_seq]
                for d_seq in itertools.permutations(sorted(drops)):
                    seq = p_seq + d_seq
                    if feasible_mini_route(seq, inst) is not None:
                        out.append(MiniRoute(seq))
    out.sort(key=lambda mr: mr.nodes)
    return out


def feasible_pair_edges(inst: Instance,
                        minis: Optional[Sequence[MiniRoute]] = None) -> Set[Edge]:
    """Connector edges (last dropoff -> next first pickup) realised by some
    feasible ordered pair of node-disjoint mini routes."""
    if minis is None:
        minis = all_feasible_mini_routes(inst)
    edges: Set[Edge] = set()
    for r1 in minis:
        s1 = set(r1.nodes)
        for r2 in minis:
            if r1 is r2 or s1.intersection(r2.nodes):
                continue
            e = (r1.nodes[-1], r2.nodes[0])
            if e in edges:
                continue
            if feasible_av_route((r1, r2), inst) is not None:
                edges.add(e)
    return edges


def all_feasible_av_routes(inst: Instance,
                           minis: Optional[Sequence[MiniRoute]] = None,
                           max_routes: int = 200_000) -> list[AVRoute]:
    """Every feasible vehicle route (any chain of node-disjoint mini routes).

    Depth-first chaining with exact pruning: a prefix of a feasible chain is
    itself feasible, so dead prefixes are cut immediately.
    """
    if minis is None:
        minis = all_feasible_mini_routes(inst)
    routes: list[AVRoute] = []

    def extend(chain: list[MiniRoute], used: Set[int]):
        if len(routes) > max_routes:
            raise RuntimeError("AV-route enumeration exploded; instance too large")
        for mr in minis:
            if used.intersection(mr.nodes):
                continue
            cand = chain + [mr]
            if feasible_av_route(cand, inst) is None:
                continue
            routes.append(AVRoute(tuple(cand)))
            extend(cand, used | set(mr.nodes))

    extend([], set())
    routes.sort(key=lambda r: r.nodes)
    return routes


def route_distance(route: AVRoute, inst: Instance) -> int:
    return sequence_distance(route.nodes, inst, include_depot=True)


def _pickup_mask(nodes: Iterable[int], n: int) -> int:
    # inbound pickup i -> bit i-1, outbound pickup 2n+i -> bit n+i-1
    mask = 0
    for v in nodes:
        if model.is_pickup(v, n):
            mask |= 1 << (v - 1 if v <= n else v - n - 1)
    return mask


def best_plan_by_enumeration(inst: Instance, objective: str = "lex"
                             ) -> Tuple[int, int, list[AVRoute]]:
    """Provably optimal plan by set-partition DP over pickup coverage.

    objective "lex" minimises (vehicles, metres); "distance" minimises
    metres alone (vehicles break ties).  Returns (vehicles, metres, routes).
    """
    if objective not in ("lex", "distance"):
        raise ValueError(f"unknown objective {objective!r}")
    n = inst.n
    routes = all_feasible_av_routes(inst)
    entries = [(r, _pickup_mask(r.nodes, n), route_distance(r, inst))
               for r in routes]
    full = (1 << (2 * n)) - 1

    # dp over covered-pickup masks
    best: list[Optional[tuple[int, int]]] = [None] * (full + 1)
    parent: list[Optional[tuple]] = [None] * (full + 1)
    best[0] = (0, 0)
    for mask in range(full + 1):
        if best[mask] is None:
            continue
        vc, dist = best[mask]
        for idx, (r, rmask, rdist) in enumerate(entries):
            if mask & rmask:
                continue
            nm = mask | rmask
            cand = (vc + 1, dist + rdist)
            cur = best[nm]
            if cur is None:
                better = True
            elif objective == "lex":
                better = cand < cur
            else:
                better = (cand[1], cand[0]) < (cur[1], cur[0])
            if better:
                best[nm] = cand
                parent[nm] = (mask, idx)
    if best[full] is None:
        raise RuntimeError("no complete plan exists by enumeration")
    plan: list[AVRoute] = []
    mask = full
    while mask:
        pmask, idx = parent[mask]
        plan.append(entries[idx][0])
        mask = pmask
    plan.sort(key=lambda r: r.nodes)
    vc, dist = best[full]
    return vc, dist, plan


def min_distance_with_vehicles(inst: Instance, vehicles: int) -> Optional[int]:
    """Least total metres over complete plans using exactly ``vehicles``
    routes, or None if no such plan exists.  Brute force."""
    n = inst.n
    routes = all_feasible_av_routes(inst)
    entries = [(_pickup_mask(r.nodes, n), route_distance(r, inst))
               for r in routes]
    full = (1 << (2 * n)) - 1
    best: dict[tuple[int, int], int] = {(0, 0): 0}
    for _ in range(vehicles):
        nxt: dict[tuple[int, int], int] = {}
        for (mask, used), dist in best.items():
            for rmask, rdist in entries:
                if mask & rmask:
                    continue
                key = (mask | rmask, used + 1)
                val = dist + rdist
                if key not in nxt or val < nxt[key]:
                    nxt[key] = val
        best.update(nxt)
    return best.get((full, vehicles))
