"""What a finished plan means operationally and in dollars.

Durations follow the day-route schedules: a vehicle is "busy" while it
carries at least one rider or drives empty between stops, and idle the
rest of its span (parked or waiting empty).  Occupancy shares split the
passenger time by how many riders are aboard, in exact integer seconds.
The no-sharing reference point is every commuter driving their own car:
n vehicles, two direct trips each, no depot legs.

Costs mirror a simple ownership model: two-rate exponential depreciation
plus per-mile fuel and wear on the vehicle side; a one-off charger
install plus annual parking on the infrastructure side.  All dollar
arithmetic runs on exact decimal fractions so hand-computed examples
match to the cent.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Tuple

from . import model
from .feasibility import sequence_distance

__all__ = [
    "PlanMetrics",
    "CostModel",
    "compute_metrics",
    "no_sharing_baseline",
    "vehicle_cost",
    "infrastructure_cost",
    "WEEKDAYS_PER_YEAR",
]

WEEKDAYS_PER_YEAR = 261
_METERS_PER_MILE = Fraction(1609344, 1000)


@dataclass(frozen=True)
class PlanMetrics:
    vehicle_count: int
    vmt_m: int
    trip_counts: Tuple[int, ...]                 # served trips per route
    passenger_s: Tuple[int, ...]                 # >=1 rider aboard, per route
    busy_s: Tuple[int, ...]                      # passenger + empty driving
    span_s: Tuple[int, ...]                      # depot departure -> return
    occupancy_fractions: Tuple[Fraction, ...]    # share of passenger time at 1..K
    no_sharing_vc: int
    no_sharing_vmt_m: int

    @property
    def idle_s(self) -> Tuple[int, ...]:
        return tuple(s - b for s, b in zip(self.span_s, self.busy_s))

    @property
    def trips_per_route_mean(self) -> float:
        return statistics.mean(self.trip_counts) if self.trip_counts else 0.0

    @property
    def trips_per_route_sd(self) -> float:
        return statistics.pstdev(self.trip_counts) if self.trip_counts else 0.0

    def to_dict(self) -> dict:
        return {
            "vehicle_count": self.vehicle_count,
            "vmt_m": self.vmt_m,
            "trip_counts": list(self.trip_counts),
            "passenger_s": list(self.passenger_s),
            "busy_s": list(self.busy_s),
            "span_s": list(self.span_s),
            "idle_s": list(self.idle_s),
            "occupancy_fractions": [_frac_str(f)
                                    for f in self.occupancy_fractions],
            "trips_per_route_mean": self.trips_per_route_mean,
            "trips_per_route_sd": self.trips_per_route_sd,
            "no_sharing_vc": self.no_sharing_vc,
            "no_sharing_vmt_m": self.no_sharing_vmt_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanMetrics":
        return cls(
            vehicle_count=int(d["vehicle_count"]),
            vmt_m=int(d["vmt_m"]),
            trip_counts=tuple(d["trip_counts"]),
            passenger_s=tuple(d["passenger_s"]),
            busy_s=tuple(d["busy_s"]),
            span_s=tuple(d["span_s"]),
            occupancy_fractions=tuple(Fraction(f)
                                      for f in d["occupancy_fractions"]),
            no_sharing_vc=int(d["no_sharing_vc"]),
            no_sharing_vmt_m=int(d["no_sharing_vmt_m"]),
        )


def _frac_str(f: Fraction) -> str | int:
    return int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def no_sharing_baseline(inst: model.Instance) -> tuple[int, int]:
    """(vehicle count, metres) when every commuter drives their own car."""
    n = inst.n
    vmt = sum(inst.sigma(i, n + i) + inst.sigma(2 * n + i, 3 * n + i)
              for i in range(1, n + 1))
    return n, vmt


def _walk_route(route, inst: model.Instance):
    """Per-route durations from its schedule; exact integer seconds."""
    n = inst.n
    levels = dict.fromkeys(range(1, inst.capacity + 1), 0)
    passenger = empty_drive = 0
    aboard = 0
    prev, t = model.START_DEPOT, route.depot_departure_s
    for v, x in zip(route.nodes, route.starts):
        leg = x - t                      # driving plus any in-place waiting
        if aboard >= 1:
            passenger += leg
            levels[aboard] += leg
        else:
            empty_drive += inst.tau(prev, v)
        if model.is_dropoff(v, n):
            aboard -= 1
        s = inst.service(v)
        if aboard >= 1:
            passenger += s
            levels[aboard] += s
        if model.is_pickup(v, n):
            aboard += 1
            if aboard > inst.capacity:
                raise ValueError(f"route exceeds capacity at node {v}")
        prev, t = v, x + s
    if aboard:
        raise ValueError("route returns to the depot with riders aboard")
    empty_drive += inst.tau(prev, model.end_depot(n))
    span = route.depot_return_s - route.depot_departure_s
    trips = sum(1 for v in route.nodes if model.is_pickup(v, n))
    return trips, passenger, passenger + empty_drive, span, levels


def compute_metrics(plan, inst: model.Instance) -> PlanMetrics:
    """Walk every scheduled route of a plan into a :class:`PlanMetrics`.

    ``plan`` is a solve result or any iterable of routes exposing
    ``nodes``/``starts`` and the depot times.
    """
    routes: Iterable = getattr(plan, "routes", plan)
    trips, psg, busy, span = [], [], [], []
    totals = dict.fromkeys(range(1, inst.capacity + 1), 0)
    vmt = 0
    for route in routes:
        k, p, b, s, levels = _walk_route(route, inst)
        trips.append(k)
        psg.append(p)
        busy.append(b)
        span.append(s)
        for lvl, secs in levels.items():
            totals[lvl] += secs
        dist = getattr(route, "distance_m", None)
        vmt += dist if dist is not None else sequence_distance(route.nodes, inst)
    grand = sum(totals.values())
    if grand:
        occupancy = tuple(Fraction(totals[k], grand)
                          for k in range(1, inst.capacity + 1))
    else:
        occupancy = (Fraction(0),) * inst.capacity
    ns_vc, ns_vmt = no_sharing_baseline(inst)
    return PlanMetrics(
        vehicle_count=len(trips),
        vmt_m=vmt,
        trip_counts=tuple(trips),
        passenger_s=tuple(psg),
        busy_s=tuple(busy),
        span_s=tuple(span),
        occupancy_fractions=occupancy,
        no_sharing_vc=ns_vc,
        no_sharing_vmt_m=ns_vmt,
    )


# ---------------------------------------------------------------------------
# ownership costs


@dataclass(frozen=True)
class CostModel:
    price: float = 30000.0
    first_year_rate: float = 0.24       # value lost in year one
    later_rate: float = 0.15            # and per year after that
    fuel_per_mile: float = 0.15
    wear_per_mile: float = 0.08
    parking_per_year: float = 800.0
    charger_install: float = 1400.0     # one-off, per vehicle

    def __post_init__(self) -> None:
        for rate in (self.first_year_rate, self.later_rate):
            if not 0 <= rate < 1:
                raise ValueError(f"depreciation rate {rate} outside [0, 1)")
        for amount in (self.price, self.fuel_per_mile, self.wear_per_mile,
                       self.parking_per_year, self.charger_install):
            if amount < 0:
                raise ValueError("cost model amounts must be non-negative")


def _dec(x) -> Fraction:
    """Decimal-exact Fraction: floats go through their shortest repr."""
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def depreciation(cost_model: CostModel, years: int) -> Fraction:
    """Value lost per vehicle: full first-year rate, then compounding."""
    p = _dec(cost_model.price)
    keep = (1 - _dec(cost_model.first_year_rate)) \
        * (1 - _dec(cost_model.later_rate)) ** (years - 1)
    return p - p * keep


def vehicle_cost(metrics, cost_model: CostModel, years: int) -> Fraction:
    """Fleet depreciation plus per-mile fuel and wear over ``years``.

    The mileage term charges the plan's daily vehicle-miles on every
    weekday (261 per year).
    """
    if years < 1:
        raise ValueError(f"vehicle cost needs years >= 1, got {years}")
    daily_miles = Fraction(metrics.vmt_m) / _METERS_PER_MILE
    per_mile = _dec(cost_model.fuel_per_mile) + _dec(cost_model.wear_per_mile)
    return (metrics.vehicle_count * depreciation(cost_model, years)
            + per_mile * daily_miles * WEEKDAYS_PER_YEAR * years)


def infrastructure_cost(metrics, cost_model: CostModel, years: int,
                        include_charger: bool = True) -> Fraction:
    """Charger installs plus annual parking for the whole fleet.

    Commuter-owned baselines set ``include_charger=False``: their cars
    still park, but nothing is installed.
    """
    if years < 0:
        raise ValueError(f"infrastructure cost needs years >= 0, got {years}")
    vc = metrics.vehicle_count
    charger = _dec(cost_model.charger_install) if include_charger else Fraction(0)
    return vc * charger + vc * _dec(cost_model.parking_per_year) * years
