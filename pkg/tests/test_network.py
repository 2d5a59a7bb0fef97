"""Graph construction and edge-filter soundness."""

from __future__ import annotations

import pytest

from commutepool import model
from commutepool.enumeration import all_feasible_mini_routes
from commutepool.feasibility import feasible_mini_route
from commutepool.network import (SINK, build_all_pricing_graphs,
                                 build_master_graph, build_pricing_graph,
                                 filter_soundness_oracle, tighten_windows, to_dot)

from conftest import random_instance


def test_master_graph_depot_structure(pair_wide):
    g = build_master_graph(pair_wide)
    n = pair_wide.n
    vs, vt = model.START_DEPOT, model.end_depot(n)
    for (u, v) in g.edges:
        if u == vs:
            assert model.is_pickup(v, n)
        if v == vt:
            assert model.is_dropoff(u, n)
        assert v != vs and u != vt
    # start depot reaches every pickup, every dropoff reaches the end depot
    assert set(g.out_adj[vs]) == set(model.pickups(n))
    assert set(g.in_adj[vt]) == set(model.dropoffs(n))


def test_master_graph_known_removals(pair_wide):
    g = build_master_graph(pair_wide)
    assert g.removed[(3, 1)] == "b"       # own dropoff back to own pickup
    assert g.removed[(1, 5)] == "b"       # pickup to own evening pickup
    assert g.removed[(1, 6)] == "b"       # cross-direction, not dropoff->pickup
    assert g.removed[(5, 1)] == "b"
    # inbound dropoff at w back to h1: arrives way past the morning deadline
    assert g.removed[(4, 1)] == "c"
    # dropoff -> pickup across the day survives (vehicle reuse)
    assert (4, 5) in g.edges
    assert (3, 6) in g.edges
    # same-commuter chain dropoff(morning) -> pickup(evening) survives
    assert (3, 5) in g.edges
    for e, rule in g.removed.items():
        assert rule in ("a", "b", "c", "d", "e"), e


def test_pricing_graph_shape(pair_wide):
    g = build_pricing_graph(pair_wide, 1)
    assert g.pickups == [1, 2] and g.dropoffs == [3, 4]
    for (u, v) in g.edges:
        assert v != 1                                     # nothing re-enters the root
        if v == SINK:
            assert u in g.dropoffs                        # sink fed by dropoffs only
        if u in g.dropoffs and v != SINK:
            assert v in g.dropoffs                        # no dropoff -> pickup
    # root must not start by dropping someone else
    assert (1, 4) not in g.edges
    assert (1, 3) in g.edges or (1, 3) in g.removed       # own dropoff allowed a priori


def test_pricing_graph_rejects_non_pickup_root(pair_wide):
    with pytest.raises(ValueError):
        build_pricing_graph(pair_wide, 3)


def test_window_tightening_values(pair_wide):
    w = tighten_windows(pair_wide, 1)
    assert w[1] == pair_wide.window(1)                    # root untouched
    assert w[2] == (28534, 29134)                         # drive bound 28400 is weaker
    assert w[4] == (28594, 29200)
    w2 = tighten_windows(pair_wide, 2)
    # from c2's earliest start, c1's home is reachable only at 29094 > b_1
    assert w2[1][0] == 29094
    assert w2[1][0] > pair_wide.window(1)[1]


@pytest.mark.parametrize("root", [1, 2, 5, 6])
def test_tightened_windows_keep_rooted_routes(pair_wide, root):
    inst = pair_wide
    g = build_pricing_graph(inst, root)
    for mr in all_feasible_mini_routes(inst):
        if mr.nodes[0] != root:
            continue
        sched = feasible_mini_route(mr.nodes, inst)
        for v, t in zip(sched.nodes, sched.starts):
            a, b = g.windows[v]
            assert a <= t <= b, (mr.nodes, v)


def test_filter_soundness_hand_instances(pair_wide, pair_tight, pair_broken):
    for inst in (pair_wide, pair_tight, pair_broken):
        report = filter_soundness_oracle(inst)
        assert report["ok"], report
        assert report["mini_routes"] > 0


@pytest.mark.parametrize("seed", range(6))
def test_filter_soundness_random(seed):
    inst = random_instance(seed, n=3, delta_s=420, detour_ratio=0.6)
    report = filter_soundness_oracle(inst)
    assert report["ok"], report


def test_all_pricing_graphs_cover_roots(pair_wide):
    graphs = build_all_pricing_graphs(pair_wide)
    assert sorted(graphs) == model.pickups(pair_wide.n)
    for root, g in graphs.items():
        assert g.root == root
        assert g.inbound == model.is_inbound(root, pair_wide.n)


def test_dot_dump_smoke(pair_wide):
    text = to_dot(build_master_graph(pair_wide), "master")
    assert text.startswith("digraph master {")
    assert '"0" -> "1";' in text
