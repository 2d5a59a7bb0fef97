"""Shared fixtures and instance factories."""

from __future__ import annotations

import numpy as np
import pytest

from commutepool.model import Commuter, Instance


def two_commuter_instance(delta_s: int, arrive1: int = 28800, arrive2: int = 28900,
                          detour_ratio: float = 0.1, capacity: int = 4,
                          service_s: int = 0) -> Instance:
    """Hand-built pair of commuters sharing a workplace-sited depot.

    Locations: h1, h2, workplace w, depot q (co-located with w).  Travel
    times are fixed so the interesting numbers below stay frozen:
    tau(h1,h2)=560, tau(h2,w)=60, tau(h1,w)=600, q<->w = 0; sigma = 10*tau.
    """
    tau = np.array([
        [0, 560, 600, 600],
        [560, 0, 60, 60],
        [600, 60, 0, 0],
        [600, 60, 0, 0],
    ], dtype=np.int64)
    return Instance(
        commuters=[Commuter("c1", 0, arrive1, 61200),
                   Commuter("c2", 1, arrive2, 61200)],
        coords=np.zeros((4, 2)),
        location_ids=["h1", "h2", "w", "q"],
        workplace=2,
        depot=3,
        capacity=capacity,
        delta_s=delta_s,
        detour_ratio=detour_ratio,
        service_s=service_s,
        sigma_m=tau * 10,
        tau_s=tau,
        name="two-commuter",
    )


def random_instance(seed: int, n: int = 3, delta_s: int = 300,
                    detour_ratio: float = 0.5, capacity: int = 4,
                    service_s: int = 0, span_m: float = 3000.0,
                    depot_at_workplace: bool = True) -> Instance:
    """Small random instance with homes scattered around one workplace."""
    rng = np.random.default_rng(seed)
    homes = rng.uniform(-span_m, span_m, size=(n, 2))
    extras = [[0.0, 0.0]]
    if not depot_at_workplace:
        extras.append(list(rng.uniform(-span_m, span_m, size=2)))
    coords = np.vstack([homes, np.array(extras)])
    arrive = rng.integers(7 * 3600, 9 * 3600, size=n)
    depart = rng.integers(16 * 3600, 18 * 3600, size=n)
    commuters = [Commuter(f"c{i + 1}", i, int(arrive[i]), int(depart[i]))
                 for i in range(n)]
    ids = [f"h{i + 1}" for i in range(n)] + ["w"]
    depot = n
    if not depot_at_workplace:
        ids.append("q")
        depot = n + 1
    return Instance(
        commuters=commuters,
        coords=coords,
        location_ids=ids,
        workplace=n,
        depot=depot,
        capacity=capacity,
        delta_s=delta_s,
        detour_ratio=detour_ratio,
        service_s=service_s,
        name=f"rand-{seed}",
    )


@pytest.fixture
def pair_wide() -> Instance:
    """Two commuters, roomy 5-minute windows."""
    return two_commuter_instance(delta_s=300)


@pytest.fixture
def pair_tight() -> Instance:
    """Two commuters, 30-second windows; sharing needs the delayed pickup."""
    return two_commuter_instance(delta_s=30, arrive2=28860)


@pytest.fixture
def pair_broken() -> Instance:
    """Like pair_tight but the second arrival is out of pooling reach."""
    return two_commuter_instance(delta_s=30, arrive2=28900)
