"""Independent re-implementations used only to cross-check the package.

Nothing in here shares code with src/commutepool: the grid oracle brute
forces pickup start times on the integer grid, the Floyd oracle solves the
scheduling difference constraints with Floyd-Warshall (the package engine
uses Bellman-Ford), and validate_schedule re-states every feasibility rule
from scratch.  Slow and proud of it.
"""

from __future__ import annotations

import itertools
from typing import List, Optional, Sequence

from commutepool import model
from commutepool.model import Instance

BIG = 10 ** 12


def _pairs_by_stack(seq: Sequence[int], inst: Instance) -> Optional[list[tuple[int, int]]]:
    """(pickup_pos, dropoff_pos) matching, or None if the order is invalid."""
    n = inst.n
    open_: dict[int, int] = {}
    pairs = []
    for j, v in enumerate(seq):
        if model.is_depot(v, n):
            return None
        if model.is_pickup(v, n):
            if v in open_:
                return None
            open_[v] = j
            if len(open_) > inst.capacity:
                return None
        else:
            p = model.pickup_of(v, n)
            if p not in open_:
                return None
            pairs.append((open_[p], j))
            del open_[p]
    if open_:
        return None
    return pairs


def validate_schedule(seq: Sequence[int], starts: Sequence[int], inst: Instance,
                      max_visits: int = 1) -> List[str]:
    """All rule violations of a proposed schedule; [] means valid."""
    bad: List[str] = []
    n = inst.n
    counts: dict[int, int] = {}
    for v in seq:
        counts[v] = counts.get(v, 0) + 1
    for v, c in counts.items():
        if c > max_visits:
            bad.append(f"node {v} visited {c} times")
    pairs = _pairs_by_stack(seq, inst)
    if pairs is None:
        bad.append("pairing/precedence/capacity broken")
        return bad
    if len(starts) != len(seq):
        bad.append("schedule length mismatch")
        return bad
    for j, v in enumerate(seq):
        a, b = inst.window(v)
        if not (a <= starts[j] <= b):
            bad.append(f"pos {j} node {v}: start {starts[j]} outside [{a}, {b}]")
    for j in range(1, len(seq)):
        u, v = seq[j - 1], seq[j]
        arr = starts[j - 1] + inst.service(u) + inst.tau(u, v)
        if model.is_pickup(v, n):
            if starts[j] < arr:
                bad.append(f"pos {j}: starts before arrival ({starts[j]} < {arr})")
        else:
            if starts[j] != arr:
                bad.append(f"pos {j}: waiting into a dropoff ({starts[j]} != {arr})")
    for jp, jd in pairs:
        p = seq[jp]
        ride = starts[jd] - starts[jp] - inst.service(p)
        if ride > inst.ride_limit(p):
            bad.append(f"ride of pickup {p}: {ride} > {inst.ride_limit(p)}")
    return bad


def grid_schedule(seq: Sequence[int], inst: Instance,
                  max_combos: int = 2_000_000) -> Optional[list[int]]:
    """Exhaustive feasibility over integer pickup start times.

    Dropoff times are forced (no waiting into dropoffs), so a schedule is
    fully determined by its pickup starts; trying the whole grid is an exact
    oracle.  Raises if the window product is too big to enumerate.
    """
    if _pairs_by_stack(seq, inst) is None:
        return None
    n = inst.n
    pick_pos = [j for j, v in enumerate(seq) if model.is_pickup(v, n)]
    ranges = []
    total = 1
    for j in pick_pos:
        a, b = inst.window(seq[j])
        total *= (b - a + 1)
        if total > max_combos:
            raise RuntimeError(f"grid too large ({total} combos)")
        ranges.append(range(a, b + 1))
    for combo in itertools.product(*ranges):
        starts = [0] * len(seq)
        it = iter(combo)
        ok = True
        for j, v in enumerate(seq):
            if model.is_pickup(v, n):
                t = next(it)
                if j > 0:
                    arr = starts[j - 1] + inst.service(seq[j - 1]) + inst.tau(seq[j - 1], v)
                    if t < arr:
                        ok = False
                        break
            else:
                t = starts[j - 1] + inst.service(seq[j - 1]) + inst.tau(seq[j - 1], v)
                a, b = inst.window(v)
                if not (a <= t <= b):
                    ok = False
                    break
            starts[j] = t
        if ok and not validate_schedule(seq, starts, inst, max_visits=2):
            return starts
    return None


def floyd_schedule(seq: Sequence[int], inst: Instance) -> Optional[list[int]]:
    """Feasible schedule via Floyd-Warshall on the constraint graph, or None.

    Edge u -> v with weight w encodes x_v - x_u <= w; vertex z anchors the
    clock.  A negative diagonal after closure means no schedule exists;
    otherwise x_j = D[z][j] is feasible (it is the latest schedule).
    """
    pairs = _pairs_by_stack(seq, inst)
    if pairs is None:
        return None
    m = len(seq)
    z = m
    D = [[BIG] * (m + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        D[i][i] = 0

    def add(u: int, v: int, w: int):
        if w < D[u][v]:
            D[u][v] = w

    n = inst.n
    for j, v in enumerate(seq):
        a, b = inst.window(v)
        add(z, j, b)
        add(j, z, -a)
        if j > 0:
            u = seq[j - 1]
            leg = inst.service(u) + inst.tau(u, v)
            add(j, j - 1, -leg)
            if model.is_dropoff(v, n):
                add(j - 1, j, leg)
    for jp, jd in pairs:
        p = seq[jp]
        add(jp, jd, inst.ride_limit(p) + inst.service(p))

    for k in range(m + 1):
        Dk = D[k]
        for i in range(m + 1):
            dik = D[i][k]
            if dik >= BIG:
                continue
            row = D[i]
            for j in range(m + 1):
                alt = dik + Dk[j]
                if alt < row[j]:
                    row[j] = alt
    for i in range(m + 1):
        if D[i][i] < 0:
            return None
    return [D[z][j] for j in range(m)]


def random_valid_order(rng, inst: Instance, commuters: Sequence[int],
                       interleave: bool = True) -> list[int]:
    """A random trip-node order with sane pairing for the given commuters.

    ``commuters`` holds pickup nodes (any direction).  With interleave=False
    the result is a mini-route block per direction in random order.
    """
    n = inst.n
    if not interleave:
        seq: list[int] = []
        for inbound in (True, False):
            picks = [p for p in commuters if model.is_inbound(p, n) == inbound]
            if not picks:
                continue
            picks = list(picks)
            rng.shuffle(picks)
            drops = [model.dropoff_of(p, n) for p in picks]
            rng.shuffle(drops)
            seq.extend(picks + drops)
        return seq
    todo = set(commuters)
    aboard: list[int] = []
    seq = []
    while todo or aboard:
        choices = []
        if todo and len(aboard) < inst.capacity:
            choices.extend(("p", p) for p in sorted(todo))
        choices.extend(("d", p) for p in sorted(aboard))
        kind, p = choices[rng.integers(len(choices))]
        if kind == "p":
            todo.remove(p)
            aboard.append(p)
            seq.append(p)
        else:
            aboard.remove(p)
            seq.append(model.dropoff_of(p, n))
    return seq
