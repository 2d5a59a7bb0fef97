"""Problem data model: commuters, trip nodes, time windows, instances.

Everything downstream works on an integer grid: times are seconds, distances
are metres.  A problem with n commuters has 4n trip nodes plus two depot
copies:

    node 0          start depot
    nodes 1..n      inbound pickups   (home, morning)
    nodes n+1..2n   inbound dropoffs  (workplace)
    nodes 2n+1..3n  outbound pickups  (workplace, evening)
    nodes 3n+1..4n  outbound dropoffs (home)
    node 4n+1       end depot

Commuter i's four nodes are i, n+i, 2n+i, 3n+i and must be visited in that
order across the day.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400

START_DEPOT = 0


# ---------------------------------------------------------------------------
# node index arithmetic
# ---------------------------------------------------------------------------

def num_nodes(n: int) -> int:
    """Total node count including both depot copies."""
    return 4 * n + 2


def end_depot(n: int) -> int:
    return 4 * n + 1


def is_depot(v: int, n: int) -> bool:
    return v == START_DEPOT or v == 4 * n + 1


def is_pickup(v: int, n: int) -> bool:
    return (1 <= v <= n) or (2 * n + 1 <= v <= 3 * n)


def is_dropoff(v: int, n: int) -> bool:
    return (n + 1 <= v <= 2 * n) or (3 * n + 1 <= v <= 4 * n)


def is_inbound(v: int, n: int) -> bool:
    """True for morning-direction trip nodes (home -> workplace)."""
    return 1 <= v <= 2 * n


def pickup_of(v: int, n: int) -> int:
    """The pickup node paired with dropoff ``v``."""
    return v - n


def dropoff_of(v: int, n: int) -> int:
    """The dropoff node paired with pickup ``v``."""
    return v + n


def commuter_of(v: int, n: int) -> int:
    """0-based commuter index owning trip node ``v``."""
    return (v - 1) % n


def pickups(n: int, inbound: Optional[bool] = None) -> list[int]:
    if inbound is None:
        return list(range(1, n + 1)) + list(range(2 * n + 1, 3 * n + 1))
    if inbound:
        return list(range(1, n + 1))
    return list(range(2 * n + 1, 3 * n + 1))

def dropoffs(n: int, inbound: Optional[bool] = None) -> list[int]:
    return [p + n for p in pickups(n, inbound)]


def trip_nodes(n: int) -> list[int]:
    return list(range(1, 4 * n + 1))


# ---------------------------------------------------------------------------
# data records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Commuter:
    """One participant with a morning and an evening trip.

    arrive_by_s: desired workplace arrival (seconds after midnight)
    depart_at_s: desired workplace departure
    """

    cid: str
    home: int              # location index
    arrive_by_s: int
    depart_at_s: int


@dataclass(frozen=True)
class Request:
    """A single trip node with its service window.

    ``earliest_s``/``latest_s`` bound the service *start* time.  For dropoff
    nodes ``earliest_s`` is the implied bound reached by driving straight
    from the paired pickup's earliest start.
    """

    node: int
    location: int
    pickup: bool
    inbound: bool
    commuter: int          # 0-based
    earliest_s: int
    latest_s: int
    service_s: int


def _euclidean(coords: np.ndarray) -> np.ndarray:
    d = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((d * d).sum(axis=2))


def _manhattan(coords: np.ndarray) -> np.ndarray:
    d = np.abs(coords[:, None, :] - coords[None, :, :])
    return d.sum(axis=2)

_METRICS = {"euclidean": _euclidean, "manhattan": _manhattan}


def ride_limit_for(tau_direct: int, detour_ratio: float) -> int:
    """floor((1 + R) * tau), computed in exact arithmetic.

    Going through floats would round 1.15 * 20 down to 22; Fraction keeps the
    floor honest for the ratio values anyone actually passes.
    """
    from fractions import Fraction
    r = Fraction(detour_ratio).limit_denominator(10 ** 9)
    return tau_direct + math.floor(r * tau_direct)


def distance_matrices(coords: np.ndarray, speed_mps: float,
                      metric: str = "euclidean") -> tuple[np.ndarray, np.ndarray]:
    """Integer distance (m) and travel-time (s) matrices for a coordinate set.

    Ceiling rounding keeps both matrices triangle-inequality safe: ceil is
    subadditive, so ceil(a+b) <= ceil(a) + ceil(b) and likewise for the
    per-entry time division of an already-integer distance.
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    raw = _METRICS[metric](np.asarray(coords, dtype=float))
    sigma = np.ceil(raw - 1e-9).astype(np.int64)
    np.fill_diagonal(sigma, 0)
    tau = np.ceil(sigma / float(speed_mps) - 1e-9).astype(np.int64)
    np.fill_diagonal(tau, 0)
    return sigma, tau


@dataclass
class Instance:
    """A self-contained routing problem over one commuter pool.

    ``tau_s`` / ``sigma_m`` are location-level matrices; node-level lookups go
    through :meth:`tau` / :meth:`sigma` using ``node_location``.
    """

    commuters: list[Commuter]
    coords: np.ndarray                  # (m, 2) float
    location_ids: list[str]
    workplace: int                      # location index
    depot: int                          # location index
    capacity: int
    delta_s: int
    detour_ratio: float
    service_s: int = 0
    speed_mps: float = 10.0
    metric: str = "euclidean"
    sigma_m: Optional[np.ndarray] = None
    tau_s: Optional[np.ndarray] = None
    name: str = "instance"

    requests: list[Optional[Request]] = field(init=False, repr=False)
    ride_limit_s: dict[int, int] = field(init=False, repr=False)
    node_location: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=float)
        if self.sigma_m is None or self.tau_s is None:
            self.sigma_m, self.tau_s = distance_matrices(
                self.coords, self.speed_mps, self.metric)
        self.sigma_m = np.asarray(self.sigma_m, dtype=np.int64)
        self.tau_s = np.asarray(self.tau_s, dtype=np.int64)
        self._derive_nodes()

    # -- basic accessors ----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.commuters)

    def tau(self, u: int, v: int) -> int:
        """Travel time in seconds between two nodes."""
        return int(self.tau_s[self.node_location[u], self.node_location[v]])

    def sigma(self, u: int, v: int) -> int:
        """Travel distance in metres between two nodes."""
        return int(self.sigma_m[self.node_location[u], self.node_location[v]])

    def request(self, v: int) -> Request:
        r = self.requests[v]
        if r is None:
            raise KeyError(f"node {v} is a depot, not a trip node")
        return r

    def service(self, v: int) -> int:
        return 0 if is_depot(v, self.n) else self.requests[v].service_s

    def window(self, v: int) -> tuple[int, int]:
        r = self.request(v)
        return r.earliest_s, r.latest_s

    def ride_limit(self, pickup_node: int) -> int:
        return self.ride_limit_s[pickup_node]

    def direct_sigma(self, ci: int) -> int:
        """Round-trip direct distance for commuter ``ci`` (both directions)."""
        h = self.commuters[ci].home
        w = self.workplace
        return int(self.sigma_m[h, w] + self.sigma_m[w, h])

    # -- window derivation --------------------------------------------------

    def _derive_nodes(self) -> None:
        n = self.n
        if n == 0:
            raise ValueError("instance has no commuters")
        if self.capacity < 1:
            raise ValueError("vehicle capacity must be at least 1")
        locs = np.zeros(num_nodes(n), dtype=np.int64)
        locs[START_DEPOT] = self.depot
        locs[end_depot(n)] = self.depot
        reqs: list[Optional[Request]] = [None] * num_nodes(n)
        limits: dict[int, int] = {}
        s = int(self.service_s)
        delta = int(self.delta_s)
        clamped = 0
        for ci, c in enumerate(self.commuters):
            i = ci + 1
            locs[i] = c.home
            locs[n + i] = self.workplace
            locs[2 * n + i] = self.workplace
            locs[3 * n + i] = c.home

            tau_in = int(self.tau_s[c.home, self.workplace])
            tau_out = int(self.tau_s[self.workplace, c.home])
            l_in = ride_limit_for(tau_in, self.detour_ratio)
            l_out = ride_limit_for(tau_out, self.detour_ratio)
            limits[i] = l_in
            limits[2 * n + i] = l_out

            # morning: hard arrival deadline, pickup window backed out of it
            b_drop_in = c.arrive_by_s + delta
            b_pick_in = b_drop_in - s - l_in
            a_pick_in = b_pick_in - 2 * delta
            if a_pick_in < 0 or b_pick_in < 0:
                clamped += 1
                a_pick_in = max(a_pick_in, 0)
                b_pick_in = max(b_pick_in, 0)
            a_drop_in = a_pick_in + s + tau_in

            # evening: departure window around the desired time
            a_pick_out = c.depart_at_s - delta
            b_pick_out = c.depart_at_s + delta
            if a_pick_out < 0:
                clamped += 1
                a_pick_out = 0
            b_drop_out = b_pick_out + s + l_out
            a_drop_out = a_pick_out + s + tau_out

            if b_drop_out > SECONDS_PER_DAY or b_drop_in > SECONDS_PER_DAY:
                raise ValueError(
                    f"commuter {c.cid}: derived windows cross midnight")

            reqs[i] = Request(i, c.home, True, True, ci, a_pick_in, b_pick_in, s)
            reqs[n + i] = Request(n + i, self.workplace, False, True, ci,
                                  a_drop_in, b_drop_in, s)
            reqs[2 * n + i] = Request(2 * n + i, self.workplace, True, False, ci,
                                      a_pick_out, b_pick_out, s)
            reqs[3 * n + i] = Request(3 * n + i, c.home, False, False, ci,
                                      a_drop_out, b_drop_out, s)
        if clamped:
            log.warning("%d derived window bounds clamped to 0", clamped)
        self.node_location = locs
        self.requests = reqs
        self.ride_limit_s = limits

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Raise ValueError on structural problems; cheap enough to run always."""
        n = self.n
        m = len(self.coords)
        if self.sigma_m.shape != (m, m) or self.tau_s.shape != (m, m):
            raise ValueError("matrix shapes do not match the location table")
        if (self.sigma_m < 0).any() or (self.tau_s < 0).any():
            raise ValueError("negative distances or travel times")
        if np.diagonal(self.tau_s).any() or np.diagonal(self.sigma_m).any():
            raise ValueError("matrix diagonals must be zero")
        for v in trip_nodes(n):
            r = self.request(v)
            if r.earliest_s > r.latest_s:
                raise ValueError(f"node {v}: empty window [{r.earliest_s}, {r.latest_s}]")
        for p in pickups(n):
            if self.ride_limit_s[p] < self.tau(p, dropoff_of(p, n)):
                raise ValueError(f"pickup {p}: ride limit below direct travel time")

    def audit_triangle(self) -> int:
        """Number of triangle-inequality violations across both matrices."""
        bad = 0
        for mat in (self.sigma_m, self.tau_s):
            through = mat[:, :, None] + mat[None, :, :]   # i->k->j over k axis 1
            best = through.min(axis=1)
            bad += int((mat > best).sum())
        return bad

    # -- serialization ------------------------------------------------------

    def to_dict(self, include_matrices: bool = True) -> dict:
        d = {
            "schema": "commutepool-instance@1",
            "name": self.name,
            "params": {
                "capacity": self.capacity,
                "delta_s": self.delta_s,
                "detour_ratio": self.detour_ratio,
                "service_s": self.service_s,
                "speed_mps": self.speed_mps,
                "metric": self.metric,
            },
            "locations": {
                lid: [float(x), float(y)]
                for lid, (x, y) in zip(self.location_ids, self.coords)
            },
            "workplace": self.location_ids[self.workplace],
            "depot": self.location_ids[self.depot],
            "commuters": [
                {"id": c.cid, "home": self.location_ids[c.home],
                 "arrive_by_s": c.arrive_by_s, "depart_at_s": c.depart_at_s}
                for c in self.commuters
            ],
        }
        if include_matrices:
            d["matrices"] = {
                "order": list(self.location_ids),
                "sigma_m": self.sigma_m.tolist(),
                "tau_s": self.tau_s.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        if d.get("schema") != "commutepool-instance@1":
            raise ValueError(f"unrecognized instance schema: {d.get('schema')!r}")
        loc_items = list(d["locations"].items())
        location_ids = [lid for lid, _ in loc_items]
        index = {lid: k for k, lid in enumerate(location_ids)}
        coords = np.array([xy for _, xy in loc_items], dtype=float)
        commuters = [
            Commuter(c["id"], index[c["home"]],
                     int(c["arrive_by_s"]), int(c["depart_at_s"]))
            for c in d["commuters"]
        ]
        p = d["params"]
        sigma = tau = None
        if "matrices" in d:
            order = d["matrices"]["order"]
            if order != location_ids:
                perm = [index[lid] for lid in order]
                inv = np.argsort(perm)
                sigma = np.asarray(d["matrices"]["sigma_m"])[np.ix_(inv, inv)]
                tau = np.asarray(d["matrices"]["tau_s"])[np.ix_(inv, inv)]
            else:
                sigma = np.asarray(d["matrices"]["sigma_m"])
                tau = np.asarray(d["matrices"]["tau_s"])
        return cls(
            commuters=commuters,
            coords=coords,
            location_ids=location_ids,
            workplace=index[d["workplace"]],
            depot=index[d["depot"]],
            capacity=int(p["capacity"]),
            delta_s=int(p["delta_s"]),
            detour_ratio=float(p["detour_ratio"]),
            service_s=int(p.get("service_s", 0)),
            speed_mps=float(p.get("speed_mps", 10.0)),
            metric=p.get("metric", "euclidean"),
            sigma_m=sigma,
            tau_s=tau,
            name=d.get("name", "instance"),
        )

    def save(self, path: str | Path, include_matrices: bool = True) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(include_matrices),
                                   sort_keys=True, indent=1) + "\n",
                        encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Instance":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
