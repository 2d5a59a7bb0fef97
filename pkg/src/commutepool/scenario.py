"""Commuter pools to solve: synthetic geometry, clustering, depot placement.

The generator stands in for a real trip dataset: homes are sampled in an
annulus around a single workplace and desired times follow truncated
normals over the morning (6-9am) and evening (4-7pm) peaks.  Larger pools
are split by a capacitated agglomerative clustering, and each cluster can
be served either from the central depot or from a "local depot" placed at
the member home closest to all the others.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Union

import numpy as np
from scipy.stats import truncnorm

from .model import Commuter, Instance, distance_matrices

__all__ = [
    "Cluster",
    "cluster_commuters",
    "select_local_depot",
    "generate_synthetic",
    "subinstance",
    "with_depot",
]

# desired-time peaks, seconds after midnight
_ARRIVE_LO, _ARRIVE_HI = 6 * 3600, 9 * 3600
_DEPART_LO, _DEPART_HI = 16 * 3600, 19 * 3600


@dataclass(frozen=True)
class Cluster:
    """A group of commuters served together, with its local depot home."""

    ids: tuple[int, ...]
    local_depot: int

    @property
    def size(self) -> int:
        return len(self.ids)


def select_local_depot(members: Iterable[int], sigma: np.ndarray) -> int:
    """Member location minimizing the summed round trips to all members.

    ``members`` may repeat (commuters sharing a home count twice); ties go
    to the smallest location id.
    """
    members = list(members)
    if not members:
        raise ValueError("empty cluster has no depot")
    best = None
    for i in sorted(set(members)):
        score = sum(int(sigma[i, j]) + int(sigma[j, i]) for j in members)
        if best is None or score < best[0]:
            best = (score, i)
    return best[1]


def _centroid_dist(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.hypot(*(a - b)))
    if metric == "manhattan":
        return float(np.abs(a - b).sum())
    raise ValueError(f"unknown metric {metric!r}")


def cluster_commuters(homes: np.ndarray, cap: int,
                      metric: str = "euclidean") -> List[Cluster]:
    """Partition home locations into clusters of at most ``cap`` members.

    Capacitated agglomerative: repeatedly merge the two clusters with the
    nearest centroids whose combined size still fits, breaking distance
    ties toward the smallest member ids.  Deterministic for fixed input.
    """
    if cap < 1:
        raise ValueError(f"cluster capacity must be >= 1, got {cap}")
    homes = np.asarray(homes, dtype=float)
    groups: List[List[int]] = [[i] for i in range(len(homes))]
    while True:
        cents = [homes[g].mean(axis=0) for g in groups]
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if len(groups[i]) + len(groups[j]) > cap:
                    continue
                d = _centroid_dist(cents[i], cents[j], metric)
                if best is None or d < best[0]:
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        groups[i] = sorted(groups[i] + groups[j])
        del groups[j]
        groups.sort(key=min)
    sigma, _ = distance_matrices(homes, 1.0, metric)
    return [Cluster(tuple(g), select_local_depot(g, sigma)) for g in groups]


def _truncated_times(rng: np.random.Generator, n: int,
                     lo: int, hi: int) -> np.ndarray:
    mid, spread = (lo + hi) / 2.0, (hi - lo) / 4.0   # +-2 sigma fills the window
    vals = truncnorm.rvs(-2.0, 2.0, loc=mid, scale=spread,
                         size=n, random_state=rng)
    return np.rint(vals).astype(int)


def generate_synthetic(seed: int, n: int, *,
                       delta_s: int = 600,
                       detour_ratio: float = 0.5,
                       capacity: int = 4,
                       inner_m: float = 500.0,
                       outer_m: float = 3000.0,
                       speed_mps: float = 10.0,
                       metric: str = "euclidean",
                       service_s: int = 0,
                       depot: str = "central",
                       name: str | None = None) -> Instance:
    """Seed-reproducible synthetic pool around one workplace.

    Homes are drawn area-uniformly from the ``[inner_m, outer_m]`` annulus;
    desired arrival/departure times from +-2 sigma truncated normals over
    the commute peaks.  ``depot="local"`` puts the depot at the home chosen
    by :func:`select_local_depot` instead of at the workplace.
    """
    if n < 1:
        raise ValueError(f"need at least one commuter, got n={n}")
    if not 0 < inner_m < outer_m:
        raise ValueError(f"bad annulus radii ({inner_m}, {outer_m})")
    if depot not in ("central", "local"):
        raise ValueError(f"depot must be 'central' or 'local', got {depot!r}")

    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(inner_m ** 2, outer_m ** 2, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    homes = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    arrive = _truncated_times(rng, n, _ARRIVE_LO, _ARRIVE_HI)
    depart = _truncated_times(rng, n, _DEPART_LO, _DEPART_HI)

    coords = np.vstack([homes, [[0.0, 0.0]]])        # workplace at the origin
    sigma, tau = distance_matrices(coords, speed_mps, metric)
    depot_idx = n if depot == "central" else select_local_depot(range(n), sigma)
    return Instance(
        commuters=[Commuter(f"c{i + 1}", i, int(arrive[i]), int(depart[i]))
                   for i in range(n)],
        coords=coords,
        location_ids=[f"h{i + 1}" for i in range(n)] + ["w"],
        workplace=n,
        depot=depot_idx,
        capacity=capacity,
        delta_s=delta_s,
        detour_ratio=detour_ratio,
        service_s=service_s,
        speed_mps=speed_mps,
        metric=metric,
        sigma_m=sigma,
        tau_s=tau,
        name=name or f"syn{seed}-n{n}",
    )


def subinstance(pool: Instance, members: Union[Cluster, Sequence[int]],
                depot: str = "central", name: str | None = None) -> Instance:
    """Self-contained instance for one cluster of a larger pool.

    Matrices are sliced from the parent, never recomputed, so distances and
    times agree exactly with the pool's.  ``depot="central"`` keeps the
    pool depot; ``"local"`` uses the cluster's local depot home.
    """
    if depot not in ("central", "local"):
        raise ValueError(f"depot must be 'central' or 'local', got {depot!r}")
    if isinstance(members, Cluster):
        ids, local_home = sorted(members.ids), members.local_depot
    else:
        ids = sorted(members)
        local_home = select_local_depot(
            [pool.commuters[i].home for i in ids], pool.sigma_m)
    if not ids:
        raise ValueError("empty cluster")

    keep = list(dict.fromkeys(
        [pool.commuters[i].home for i in ids]
        + [pool.workplace]
        + ([pool.depot] if depot == "central" else [])))
    new_index = {loc: k for k, loc in enumerate(keep)}
    sel = np.ix_(keep, keep)
    return Instance(
        commuters=[Commuter(pool.commuters[i].cid,
                            new_index[pool.commuters[i].home],
                            pool.commuters[i].arrive_by_s,
                            pool.commuters[i].depart_at_s)
                   for i in ids],
        coords=pool.coords[keep],
        location_ids=[pool.location_ids[loc] for loc in keep],
        workplace=new_index[pool.workplace],
        depot=new_index[pool.depot if depot == "central" else local_home],
        capacity=pool.capacity,
        delta_s=pool.delta_s,
        detour_ratio=pool.detour_ratio,
        service_s=pool.service_s,
        speed_mps=pool.speed_mps,
        metric=pool.metric,
        sigma_m=pool.sigma_m[sel],
        tau_s=pool.tau_s[sel],
        name=name or f"{pool.name}-c{ids[0]}",
    )


def with_depot(inst: Instance, depot: str) -> Instance:
    """Same pool, different depot placement (location indices unchanged)."""
    if depot == "central":
        idx = inst.workplace
    elif depot == "local":
        idx = select_local_depot([c.home for c in inst.commuters], inst.sigma_m)
    else:
        raise ValueError(f"depot must be 'central' or 'local', got {depot!r}")
    return dataclasses.replace(inst, depot=idx)
