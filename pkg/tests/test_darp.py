"""Whole-route baseline against a brute-force partition oracle."""

from __future__ import annotations

from fractions import Fraction

import pytest

from commutepool import model
from commutepool.darp import (DarpConfig, _Stabilizer, darp_edge_costs,
                              darp_price, farley_bound, initial_columns,
                              repair_routes, solve_darp)
from commutepool.feasibility import feasible_sequence_exact, sequence_distance
from commutepool.network import build_master_graph

from conftest import random_instance, two_commuter_instance

INF = float("inf")


# --- oracle: every elementary route, then exact partitions by fleet size ---

def enumerate_routes(inst):
    """Min distance per request subset over exactly-feasible route orders."""
    n = inst.n
    reqs = model.pickups(n)
    bit = {p: 1 << i for i, p in enumerate(reqs)}
    best: dict[int, int] = {}

    def dfs(seq, aboard, mask, t):
        if seq and not aboard:
            if feasible_sequence_exact(seq, inst) is not None:
                d = sequence_distance(seq, inst)
                if mask not in best or d < best[mask]:
                    best[mask] = d
        u = seq[-1] if seq else model.START_DEPOT
        su = inst.service(u)
        if len(aboard) < inst.capacity:
            for p in reqs:
                if mask & bit[p]:
                    continue
                a, b = inst.window(p)
                t2 = max(a, t + su + inst.tau(u, p))
                if t2 <= b:
                    dfs(seq + [p], aboard | {p}, mask | bit[p], t2)
        for p in sorted(aboard):
            d = model.dropoff_of(p, n)
            a, b = inst.window(d)
            t2 = max(a, t + su + inst.tau(u, d))
            if t2 <= b:
                dfs(seq + [d], aboard - {p}, mask, t2)

    dfs([], set(), 0, 0)
    return best, (1 << len(reqs)) - 1


def partition_distances(inst):
    """dist[k] = least metres over partitions into exactly k routes."""
    best, full = enumerate_routes(inst)
    nreq = 2 * inst.n
    dist = {0: [0] + [INF] * nreq}
    for m in range(1, full + 1):
        row = [INF] * (nreq + 1)
        low = m & -m
        for r, dr in best.items():
            if r & low and (r & m) == r and (m ^ r) in dist:
                prev = dist[m ^ r]
                for k in range(nreq):
                    if prev[k] < INF and prev[k] + dr < row[k + 1]:
                        row[k + 1] = prev[k] + dr
        if any(v < INF for v in row):
            dist[m] = row
    return dist[full]


def check_exact_cover(res, inst):
    covered = [v for r in res.routes for v in r.nodes]
    assert sorted(covered) == model.trip_nodes(inst.n)
    for r in res.routes:
        assert feasible_sequence_exact(r.nodes, inst) is not None
    assert res.vc == len(res.routes)
    assert res.distance_m == sum(
        sequence_distance(r.nodes, inst) for r in res.routes)


# --- end-to-end ---

def test_pair_wide_lex(pair_wide):
    res = solve_darp(pair_wide, DarpConfig(objective="lex"))
    assert res.status == "optimal" and res.converged and res.count_converged
    by_fleet = partition_distances(pair_wide)
    fleet = min(k for k, v in enumerate(by_fleet) if v < INF)
    assert res.chi == res.vc == fleet == 1
    assert res.distance_m == by_fleet[1] == 24400
    assert res.farley_lb <= fleet
    check_exact_cover(res, pair_wide)


def test_pair_broken_still_one_vehicle(pair_broken):
    # pooling the morning legs fails, but one vehicle can chain all four trips
    res = solve_darp(pair_broken, DarpConfig(objective="lex"))
    assert res.status == "optimal"
    assert res.vc == 1
    check_exact_cover(res, pair_broken)


@pytest.mark.parametrize("seed,n", [(s, 2) for s in range(6)] + [(s, 3) for s in range(4)])
def test_matches_partition_oracle(seed, n):
    inst = random_instance(seed, n=n, delta_s=360, detour_ratio=0.5)
    res = solve_darp(inst, DarpConfig(objective="lex"))
    assert res.status == "optimal" and res.converged
    relaxed = any(t.get("event") == "pin-relaxed" for t in res.trace)
    assert not relaxed
    by_fleet = partition_distances(inst)
    fleet = min(k for k, v in enumerate(by_fleet) if v < INF)
    assert res.vc == res.chi == fleet
    assert res.farley_lb <= fleet
    assert by_fleet[res.chi] <= res.distance_m
    if res.z_lb is not None:
        assert res.z_lb <= by_fleet[res.chi]
        assert res.z_lb <= res.z_mip
    check_exact_cover(res, inst)


@pytest.mark.parametrize("seed", [0, 5])
def test_distance_mode(seed):
    inst = random_instance(seed, n=2, delta_s=360, detour_ratio=0.5)
    res = solve_darp(inst, DarpConfig(objective="distance"))
    assert res.status == "optimal" and res.chi is None
    by_fleet = partition_distances(inst)
    free_min = min(v for v in by_fleet if v < INF)
    assert res.distance_m >= free_min
    assert res.z_lb <= free_min
    check_exact_cover(res, inst)


def test_singleton_matches_pooled_procedure():
    from commutepool.ctspav import ColGenConfig, solve_ctspav
    inst = random_instance(2, n=1, delta_s=300, detour_ratio=0.5)
    d = solve_darp(inst, DarpConfig(objective="lex"))
    c = solve_ctspav(inst, ColGenConfig(objective="lex"))
    assert d.vc == c.vc == 1
    assert d.distance_m == c.distance_m
    assert [r.nodes for r in d.routes] == [r.nodes for r in c.routes]


def test_deterministic_resolve():
    inst = random_instance(7, n=3, delta_s=360, detour_ratio=0.5)
    a = solve_darp(inst, DarpConfig(objective="lex"))
    b = solve_darp(inst, DarpConfig(objective="lex"))
    assert [r.nodes for r in a.routes] == [r.nodes for r in b.routes]
    assert [r.starts for r in a.routes] == [r.starts for r in b.routes]
    assert (a.z_rmp, a.z_mip, a.chi) == (b.z_rmp, b.z_mip, b.chi)


def test_highs_backend_agrees(pair_wide):
    res = solve_darp(pair_wide, DarpConfig(objective="lex", backend="highs"))
    assert res.ok and res.vc == 1
    check_exact_cover(res, pair_wide)


def test_raw_duals_recorded_at_convergence(pair_wide):
    res = solve_darp(pair_wide, DarpConfig(objective="lex"))
    for rec in res.trace:
        if rec.get("new_columns") == 0:
            assert "cbar_raw" in rec


def test_no_stabilization_still_converges(pair_wide):
    res = solve_darp(pair_wide, DarpConfig(objective="lex",
                                           stabilization_weight=0.0))
    assert res.status == "optimal" and res.vc == 1 and res.distance_m == 24400


def test_bad_objective(pair_wide):
    with pytest.raises(ValueError):
        solve_darp(pair_wide, DarpConfig(objective="fastest"))


# --- pricing pieces ---

def test_zero_duals_price_nothing(pair_wide):
    graph = build_master_graph(pair_wide)
    for phase in ("count", "distance"):
        costs = darp_edge_costs(pair_wide, graph, {}, phase)
        done, best, full = darp_price(pair_wide, graph, costs)
        assert done == [] and full
        assert best > 0


def test_uniform_duals_reward_pooling(pair_wide):
    graph = build_master_graph(pair_wide)
    alpha = {p: Fraction(1) for p in model.pickups(pair_wide.n)}
    costs = darp_edge_costs(pair_wide, graph, alpha, "count")
    done, best, full = darp_price(pair_wide, graph, costs)
    assert full and done
    # the route costs 1 and every pickup visit rebates 1
    for c, path in done:
        assert c == 1 - sum(1 for v in path if model.is_pickup(v, pair_wide.n))
    assert best <= 1 - 4                  # some route serves all four requests
    assert any(len(path) == 8 for _, path in done)


def test_priced_paths_respect_visit_cap(pair_wide):
    graph = build_master_graph(pair_wide)
    alpha = {p: Fraction(10**6) for p in model.pickups(pair_wide.n)}
    costs = darp_edge_costs(pair_wide, graph, alpha, "distance")
    done, _, full = darp_price(pair_wide, graph, costs)
    assert full and done
    for _, path in done:
        for v in set(path):
            assert path.count(v) <= 2


def test_label_cap_reports_incomplete(pair_wide):
    graph = build_master_graph(pair_wide)
    alpha = {p: Fraction(10**6) for p in model.pickups(pair_wide.n)}
    costs = darp_edge_costs(pair_wide, graph, alpha, "distance")
    _, _, full = darp_price(pair_wide, graph, costs, label_cap=3)
    assert not full


def test_edge_costs_bad_phase(pair_wide):
    graph = build_master_graph(pair_wide)
    with pytest.raises(ValueError):
        darp_edge_costs(pair_wide, graph, {}, "both")


def test_farley_bound_values():
    assert farley_bound(6, Fraction(-5)) == 1
    assert farley_bound(3, Fraction(0)) == 3
    assert farley_bound(3, Fraction(2)) == 3      # positive minima clamp to 0
    assert farley_bound(Fraction(7, 2), Fraction(-1, 2)) == Fraction(7, 3)


def test_stabilizer_running_mean():
    stab = _Stabilizer(0.5)
    first = stab.push({1: Fraction(4)})
    assert first == {1: Fraction(4)}
    second = stab.push({1: Fraction(0)})
    # center is (4+0)/2 = 2; blend 0.5*2 + 0.5*0
    assert second == {1: Fraction(1)}


def test_stabilizer_weight_zero_passthrough():
    stab = _Stabilizer(0.0)
    stab.push({1: Fraction(4)})
    assert stab.push({1: Fraction(6)}) == {1: Fraction(6)}


def test_stabilized_no_slower_on_degenerate_toy():
    # three interchangeable commuters (identical clocks, evenly spaced homes)
    # make the cover duals maximally symmetric; paired runs, fixed data.
    # This pins current behaviour, it is not a theorem about the method.
    import numpy as np
    from commutepool.model import Commuter, Instance
    homes = [[1000.0 + 800 * i, 0.0] for i in range(3)]
    inst = Instance(
        commuters=[Commuter(f"c{i + 1}", i, 28800, 61200) for i in range(3)],
        coords=np.vstack([homes, [[0.0, 0.0]]]),
        location_ids=["h1", "h2", "h3", "w"],
        workplace=3, depot=3, capacity=4, delta_s=300, detour_ratio=0.5,
        name="degenerate-triplet")
    on = solve_darp(inst, DarpConfig(objective="lex", stabilization_weight=0.5))
    off = solve_darp(inst, DarpConfig(objective="lex", stabilization_weight=0.0))
    assert on.status == off.status == "optimal"
    assert on.iterations <= off.iterations
    assert (on.vc, on.distance_m) == (off.vc, off.distance_m)


# --- repair ---

EVENINGS = [(5, 7), (6, 8)]


def test_repair_drops_duplicate_coverage():
    inst = two_commuter_instance(delta_s=30, arrive2=28740)
    routes = [(1, 2, 4, 3), (2, 4)] + EVENINGS
    fixed = repair_routes(routes, inst)
    covered = sorted(v for seq in fixed for v in seq)
    assert covered == model.trip_nodes(inst.n)
    for seq in fixed:
        assert feasible_sequence_exact(seq, inst) is not None
    before = sum(sequence_distance(s, inst) for s in routes)
    after = sum(sequence_distance(s, inst) for s in fixed)
    assert after < before
    assert len(fixed) == 4 and all(seq for seq in fixed)


def test_repair_dedups_within_route(pair_wide):
    fixed = repair_routes([(1, 3, 1, 3), (2, 4)] + EVENINGS, pair_wide)
    assert fixed == [(1, 3), (2, 4)] + EVENINGS


def test_repair_keeps_disjoint_routes(pair_wide):
    fixed = repair_routes([(1, 3), (2, 4)] + EVENINGS, pair_wide)
    assert fixed == [(1, 3), (2, 4)] + EVENINGS


def test_repair_earliest_departure_wins():
    # the pooled order cannot reach rider 2 before 28670, the direct route
    # starts at the window opening 28644, so the direct route keeps the rider
    inst = two_commuter_instance(delta_s=30, arrive2=28740)
    fixed = repair_routes([(1, 2, 4, 3), (2, 4)] + EVENINGS, inst)
    assert fixed == [(1, 3), (2, 4)] + EVENINGS


def test_repair_departure_tie_breaks_by_route_index(pair_tight):
    # both routes hit rider 2's window opening exactly; the tie keeps the
    # rider in route 0, emptying the direct route, which is a contract breach
    with pytest.raises(RuntimeError):
        repair_routes([(1, 2, 4, 3), (2, 4)] + EVENINGS, pair_tight)


def test_initial_columns_cover_everything(pair_wide):
    cols = initial_columns(pair_wide)
    assert [c.nodes for c in cols] == [(1, 3), (2, 4), (5, 7), (6, 8)]
    assert all(c.distance_m > 0 for c in cols)
