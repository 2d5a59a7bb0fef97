"""Synthetic pools: clustering, local depots, and the instance generator."""

from __future__ import annotations

import json

import numpy as np
import pytest

from commutepool import model
from commutepool.ctspav import solve_ctspav
from commutepool.darp import solve_darp
from commutepool.scenario import (
    Cluster,
    cluster_commuters,
    generate_synthetic,
    select_local_depot,
    subinstance,
    with_depot,
)


# ---------------------------------------------------------------------------
# local depot selection


def test_depot_singleton():
    sigma = np.array([[0, 5], [5, 0]])
    assert select_local_depot([1], sigma) == 1


def test_depot_collinear_hand_sums():
    # homes on a line at 0, 1, 10; sum of round trips to the others:
    #   from 0: 2*(1+10) = 22,  from 1: 2*(1+9) = 20,  from 10: 2*(10+9) = 38
    sigma = np.array([[0, 1, 10], [1, 0, 9], [10, 9, 0]])
    assert select_local_depot([0, 1, 2], sigma) == 1


def test_depot_square_tie_smallest_id():
    pts = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
    sigma, _ = model.distance_matrices(pts, 1.0, "euclidean")
    assert select_local_depot([0, 1, 2, 3], sigma) == 0
    # restricted member sets respect the same rule
    assert select_local_depot([3, 1], sigma) == 1


def test_depot_counts_multiplicity():
    # two commuters share home 0, one lives at 2; the shared home wins
    # even though home 1 would win the unweighted sum
    sigma = np.array([[0, 2, 9], [2, 0, 8], [9, 8, 0]])
    assert select_local_depot([0, 0, 2], sigma) == 0


# ---------------------------------------------------------------------------
# clustering


def test_cluster_capacity_covers_everyone():
    rng = np.random.default_rng(0)
    homes = rng.uniform(-100, 100, size=(6, 2))
    (c,) = cluster_commuters(homes, 6)
    assert c.ids == (0, 1, 2, 3, 4, 5)
    assert c.size == 6


def test_cluster_singletons():
    rng = np.random.default_rng(1)
    homes = rng.uniform(-100, 100, size=(5, 2))
    clusters = cluster_commuters(homes, 1)
    assert [c.ids for c in clusters] == [(i,) for i in range(5)]
    assert [c.local_depot for c in clusters] == list(range(5))


def test_cluster_two_blobs():
    blob = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    homes = np.vstack([blob, blob + 1000.0])
    clusters = cluster_commuters(homes, 3)
    assert [c.ids for c in clusters] == [(0, 1, 2), (3, 4, 5)]
    # corner point of each blob minimizes the round-trip sum: 2*(10+10)=40
    # versus 2*(10+15)=50 for the others (ceil'd Euclidean distances)
    assert [c.local_depot for c in clusters] == [0, 3]


def test_cluster_merge_tie_breaks_low_index():
    # four collinear homes 10 apart; pairs (0,1),(1,2),(2,3) all tie at 10,
    # so (0,1) merges first and capacity 2 then forces (2,3)
    homes = np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]])
    clusters = cluster_commuters(homes, 2)
    assert [c.ids for c in clusters] == [(0, 1), (2, 3)]


def test_cluster_partition_property():
    rng = np.random.default_rng(7)
    homes = rng.uniform(-3000, 3000, size=(11, 2))
    for cap in (1, 3, 4, 11):
        clusters = cluster_commuters(homes, cap)
        seen = [i for c in clusters for i in c.ids]
        assert sorted(seen) == list(range(11))      # partition, no overlap
        assert all(c.size <= cap for c in clusters)
        assert all(c.local_depot in c.ids for c in clusters)
    again = cluster_commuters(homes, 4)
    assert [c.ids for c in again] == [c.ids for c in cluster_commuters(homes, 4)]


def test_cluster_rejects_bad_capacity():
    with pytest.raises(ValueError):
        cluster_commuters(np.zeros((3, 2)), 0)


# ---------------------------------------------------------------------------
# generator


def test_generate_deterministic():
    a = generate_synthetic(42, 6)
    b = generate_synthetic(42, 6)
    assert json.dumps(a.to_dict(), sort_keys=True) == \
        json.dumps(b.to_dict(), sort_keys=True)
    c = generate_synthetic(43, 6)
    assert json.dumps(a.to_dict(), sort_keys=True) != \
        json.dumps(c.to_dict(), sort_keys=True)


def test_generate_geometry_and_times():
    inst = generate_synthetic(3, 20, inner_m=400.0, outer_m=2500.0,
                              delta_s=480, detour_ratio=0.25, capacity=3)
    assert inst.n == 20
    assert inst.capacity == 3
    assert inst.delta_s == 480
    assert inst.detour_ratio == 0.25
    assert inst.depot == inst.workplace            # central by default
    radii = np.hypot(*(inst.coords[:20] - inst.coords[inst.workplace]).T)
    assert ((radii >= 400.0) & (radii <= 2500.0)).all()
    for c in inst.commuters:
        assert 6 * 3600 <= c.arrive_by_s <= 9 * 3600
        assert 16 * 3600 <= c.depart_at_s <= 19 * 3600
    inst.validate()


def test_generate_triangle_audit():
    for metric in ("euclidean", "manhattan"):
        inst = generate_synthetic(11, 50, metric=metric)
        assert inst.audit_triangle() == 0


def test_generate_single_commuter_solvable_by_both():
    inst = generate_synthetic(5, 1)
    cres = solve_ctspav(inst)
    dres = solve_darp(inst)
    assert cres.ok and cres.vc == 1
    assert dres.ok and dres.vc == 1


def test_generate_local_depot():
    inst = generate_synthetic(9, 8, depot="local")
    homes = [c.home for c in inst.commuters]
    assert inst.depot == select_local_depot(homes, inst.sigma_m)
    assert inst.depot != inst.workplace
    inst.validate()


def test_generate_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_synthetic(0, 0)
    with pytest.raises(ValueError):
        generate_synthetic(0, 2, inner_m=500.0, outer_m=400.0)
    with pytest.raises(ValueError):
        generate_synthetic(0, 2, depot="rooftop")


# ---------------------------------------------------------------------------
# cluster -> sub-instance plumbing


def test_subinstance_slices_matrices_exactly():
    pool = generate_synthetic(21, 9)
    clusters = cluster_commuters(pool.coords[:9], 4)
    subs = [subinstance(pool, c, depot="central") for c in clusters]
    assert sum(s.n for s in subs) == 9
    for cl, sub in zip(clusters, subs):
        assert [c.cid for c in sub.commuters] == \
            [pool.commuters[i].cid for i in cl.ids]
        assert sub.depot == sub.workplace
        # sliced matrices agree with the parent entry for entry
        for a, ga in enumerate(sub.location_ids):
            for b, gb in enumerate(sub.location_ids):
                pa = pool.location_ids.index(ga)
                pb = pool.location_ids.index(gb)
                assert sub.sigma_m[a, b] == pool.sigma_m[pa, pb]
                assert sub.tau_s[a, b] == pool.tau_s[pa, pb]
        sub.validate()


def test_subinstance_local_depot():
    pool = generate_synthetic(21, 9)
    cl = cluster_commuters(pool.coords[:9], 4)[0]
    sub = subinstance(pool, cl, depot="local")
    depot_id = pool.location_ids[cl.local_depot]
    assert sub.location_ids[sub.depot] == depot_id
    sub.validate()


def test_subinstance_accepts_id_list():
    pool = generate_synthetic(2, 5)
    sub = subinstance(pool, [4, 0], depot="central")
    assert [c.cid for c in sub.commuters] == ["c1", "c5"]


def test_with_depot_round_trip():
    inst = generate_synthetic(13, 6, depot="central")
    local = with_depot(inst, "local")
    assert local.depot != local.workplace
    assert local.n == inst.n
    assert with_depot(local, "central").depot == inst.workplace
    with pytest.raises(ValueError):
        with_depot(inst, "orbital")


def test_cluster_dataclass_shape():
    c = Cluster(ids=(2, 5), local_depot=5)
    assert c.size == 2
    assert c.local_depot in c.ids
