"""Route shapes and schedule feasibility.

Two schedule engines live here:

* :func:`schedule_sequence` — the fast canonical engine for pickups-then-
  dropoffs shaped sequences (mini routes and chains of them).  Forward pass
  computes earliest starts with waiting permitted at pickups only; a backward
  pass then delays every non-final pickup of each block as far as its window
  and successor allow, which provably minimizes each rider's in-vehicle time
  for this shape.  A sequence is feasible iff the canonical schedule is.

* :func:`schedule_exact` — a difference-constraint solver (Bellman-Ford) that
  handles arbitrary interleaved pickup/dropoff sequences, including repeated
  visits.  Used as the authoritative check for relaxed-elementarity columns
  and as an in-package oracle.

Vehicles may wait before starting service at a pickup; service at a dropoff
starts the instant the vehicle arrives.  A rider is on board from the end of
their pickup service to the start of their dropoff service, and that span is
capped by the pickup's ride limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import model
from .model import Instance

__all__ = [
    "MiniRoute", "AVRoute", "RouteSchedule",
    "mini_route_shape_ok", "feasible_mini_route", "feasible_av_route",
    "schedule_sequence", "schedule_exact", "feasible_sequence_exact",
    "pairing_profile", "sequence_distance",
]


@dataclass(frozen=True)
class MiniRoute:
    """An ordered same-direction service block: all pickups, then all dropoffs."""

    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))

    @property
    def size(self) -> int:
        return len(self.nodes) // 2

    def pickups(self, n: int) -> tuple[int, ...]:
        return tuple(v for v in self.nodes if model.is_pickup(v, n))

    def dropoffs(self, n: int) -> tuple[int, ...]:
        return tuple(v for v in self.nodes if model.is_dropoff(v, n))

    def inbound(self, n: int) -> bool:
        return model.is_inbound(self.nodes[0], n)


@dataclass(frozen=True)
class AVRoute:
    """A vehicle's day: depot -> mini routes in order -> depot."""

    mini_routes: tuple[MiniRoute, ...]

    def __post_init__(self):
        object.__setattr__(self, "mini_routes", tuple(self.mini_routes))

    @property
    def nodes(self) -> tuple[int, ...]:
        out: list[int] = []
        for mr in self.mini_routes:
            out.extend(mr.nodes)
        return tuple(out)


@dataclass(frozen=True)
class RouteSchedule:
    """Service start times aligned with a node sequence, plus depot times."""

    nodes: tuple[int, ...]
    starts: tuple[int, ...]
    depot_departure_s: int
    depot_return_s: int

    def time_of(self, node: int) -> int:
        """Start time of the first occurrence of ``node``."""
        return self.starts[self.nodes.index(node)]


def mini_route_shape_ok(nodes: Sequence[int], inst: Instance) -> bool:
    """Structural check: same direction, pickups-then-dropoffs, paired, <= K."""
    n = inst.n
    if not nodes or len(nodes) % 2 != 0:
        return False
    k = len(nodes) // 2
    if k > inst.capacity:
        return False
    picks, drops = nodes[:k], nodes[k:]
    if len(set(nodes)) != len(nodes):
        return False
    inbound = model.is_inbound(nodes[0], n)
    for v in nodes:
        if model.is_depot(v, n) or model.is_inbound(v, n) != inbound:
            return False
    if not all(model.is_pickup(v, n) for v in picks):
        return False
    if not all(model.is_dropoff(v, n) for v in drops):
        return False
    return {model.dropoff_of(p, n) for p in picks} == set(drops)


# ---------------------------------------------------------------------------
# canonical engine (block-shaped sequences)
# ---------------------------------------------------------------------------

def schedule_sequence(seq: Sequence[int], inst: Instance) -> Optional[list[int]]:
    """Canonical schedule for a block-shaped trip-node sequence, or None.

    The sequence must be a concatenation of mini-route blocks (every rider is
    dropped before the next block's pickups begin); use schedule_exact for
    anything wilder.
    """
    n = inst.n
    m = len(seq)
    if m == 0:
        return None
    starts = [0] * m

    # forward: earliest starts, waiting only at pickups
    for j, v in enumerate(seq):
        a, b = inst.window(v)
        if j == 0:
            t = a
        else:
            u = seq[j - 1]
            arr = starts[j - 1] + inst.service(u) + inst.tau(u, v)
            t = max(a, arr) if model.is_pickup(v, n) else arr
        if t > b:
            return None
        starts[j] = t

    # backward per block: delay every pickup except the block's last one
    j = m - 1
    while j >= 0:
        if model.is_pickup(seq[j], n):
            # seq[j] is the last pickup of its block; walk its pickup run
            k = j - 1
            while k >= 0 and model.is_pickup(seq[k], n):
                v, w = seq[k], seq[k + 1]
                cap = starts[k + 1] - inst.service(v) - inst.tau(v, w)
                # cap >= forward value, so this only ever delays
                starts[k] = min(inst.window(v)[1], cap)
                k -= 1
            j = k
        else:
            j -= 1

    # ride-duration limits against the delayed-pickup schedule
    open_at: dict[int, int] = {}
    for j, v in enumerate(seq):
        if model.is_pickup(v, n):
            open_at[v] = j
        else:
            p = model.pickup_of(v, n)
            jp = open_at.pop(p, None)
            if jp is None:
                return None
            ride = starts[j] - starts[jp] - inst.service(p)
            if ride > inst.ride_limit(p):
                return None
    if open_at:
        return None
    return starts


def _depot_times(seq: Sequence[int], starts: Sequence[int], inst: Instance) -> tuple[int, int]:
    n = inst.n
    vs, vt = model.START_DEPOT, model.end_depot(n)
    dep = starts[0] - inst.tau(vs, seq[0])
    ret = starts[-1] + inst.service(seq[-1]) + inst.tau(seq[-1], vt)
    return dep, ret


def feasible_mini_route(nodes: Sequence[int], inst: Instance) -> Optional[RouteSchedule]:
    """Schedule for one mini route if it satisfies all constraints, else None."""
    if not mini_route_shape_ok(nodes, inst):
        return None
    starts = schedule_sequence(nodes, inst)
    if starts is None:
        return None
    dep, ret = _depot_times(nodes, starts, inst)
    return RouteSchedule(tuple(nodes), tuple(starts), dep, ret)


def feasible_av_route(route: AVRoute | Sequence[MiniRoute],
                      inst: Instance) -> Optional[RouteSchedule]:
    """Joint schedule for a whole vehicle route, or None.

    Mini routes must be node-disjoint (no trip served twice by one vehicle);
    the chained sequence is scheduled as one piece so inter-block travel and
    waiting are accounted exactly.
    """
    minis = route.mini_routes if isinstance(route, AVRoute) else tuple(route)
    if not minis:
        return None
    seen: set[int] = set()
    for mr in minis:
        if not mini_route_shape_ok(mr.nodes, inst):
            return None
        if seen.intersection(mr.nodes):
            return None
        seen.update(mr.nodes)
    seq: list[int] = []
    for mr in minis:
        seq.extend(mr.nodes)
    starts = schedule_sequence(seq, inst)
    if starts is None:
        return None
    dep, ret = _depot_times(seq, starts, inst)
    return RouteSchedule(tuple(seq), tuple(starts), dep, ret)


# ---------------------------------------------------------------------------
# exact engine (difference constraints, any shape)
# ---------------------------------------------------------------------------

def pairing_profile(seq: Sequence[int], inst: Instance) -> Optional[list[tuple[int, int]]]:
    """Match pickup and dropoff occurrences along ``seq``.

    Returns a list of (pickup_pos, dropoff_pos) pairs, or None when the
    sequence breaks pairing/precedence (dropoff with nobody aboard, rider
    left on board at the end, double pickup while open) or the capacity cap.
    """
    n = inst.n
    open_pos: dict[int, int] = {}      # rider pickup node -> position
    pairs: list[tuple[int, int]] = []
    for j, v in enumerate(seq):
        if model.is_depot(v, n):
            return None
        if model.is_pickup(v, n):
            if v in open_pos:
                return None
            open_pos[v] = j
            if len(open_pos) > inst.capacity:
                return None
        else:
            p = model.pickup_of(v, n)
            if p not in open_pos:
                return None
            pairs.append((open_pos.pop(p), j))
    if open_pos:
        return None
    return sorted(pairs)


def schedule_exact(seq: Sequence[int], inst: Instance) -> Optional[list[int]]:
    """A feasible schedule via difference constraints, or None.

    Builds the full system (chain lower bounds, dropoff equalities, windows,
    ride limits) and runs Bellman-Ford; exact existence test for any visit
    order the pairing profile accepts, at O(len^2) cost, deterministic output.
    """
    pairs = pairing_profile(seq, inst)
    if pairs is None:
        return None
    n = inst.n
    m = len(seq)
    # constraints x_v - x_u <= w as (u, v, w); vertex m is the zero anchor
    cons: list[tuple[int, int, int]] = []
    for j, v in enumerate(seq):
        a, b = inst.window(v)
        cons.append((m, j, b))          # x_j <= b
        cons.append((j, m, -a))         # x_j >= a
        if j > 0:
            u = seq[j - 1]
            leg = inst.service(u) + inst.tau(u, v)
            cons.append((j, j - 1, -leg))           # x_j >= x_{j-1} + leg
            if model.is_dropoff(v, n):
                cons.append((j - 1, j, leg))        # and no waiting into dropoffs
    for jp, jd in pairs:
        p = seq[jp]
        cons.append((jp, jd, inst.ride_limit(p) + inst.service(p)))

    # earliest point = negate, solve the reversed system by Bellman-Ford
    dist = [0] * (m + 1)
    for it in range(m + 1):
        changed = False
        for u, v, w in cons:
            # reversed edge: y_u - y_v <= w with y = -x
            if dist[u] > dist[v] + w:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    else:
        return None                      # negative cycle: infeasible
    base = dist[m]
    return [-(dist[j] - base) for j in range(m)]


def feasible_sequence_exact(seq: Sequence[int], inst: Instance,
                            max_visits: int = 1) -> Optional[RouteSchedule]:
    """Authoritative feasibility for one vehicle's trip-node sequence.

    ``max_visits`` > 1 admits the repeated visits that relaxed-elementarity
    pricing can produce.
    """
    if not seq:
        return None
    counts: dict[int, int] = {}
    for v in seq:
        counts[v] = counts.get(v, 0) + 1
        if counts[v] > max_visits:
            return None
    starts = schedule_exact(seq, inst)
    if starts is None:
        return None
    dep, ret = _depot_times(seq, starts, inst)
    return RouteSchedule(tuple(seq), tuple(starts), dep, ret)


def sequence_distance(seq: Sequence[int], inst: Instance,
                      include_depot: bool = True) -> int:
    """Total metres driven along ``seq``, optionally with both depot legs."""
    n = inst.n
    total = 0
    for u, v in zip(seq, seq[1:]):
        total += inst.sigma(u, v)
    if include_depot and seq:
        total += inst.sigma(model.START_DEPOT, seq[0])
        total += inst.sigma(seq[-1], model.end_depot(n))
    return total
