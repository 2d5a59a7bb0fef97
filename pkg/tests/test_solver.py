"""Solver backends: exact certificates, cross-backend agreement."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from commutepool.simplex import Q
from commutepool.solver import (EQ, GE, LE, HighsBackend, LinearModel,
                                RationalBackend, get_backend)

RAT = RationalBackend()
HIG = HighsBackend()


def certify_lp_optimum(model: LinearModel, sol) -> None:
    """Exact KKT certificate for a rational LP solution (minimisation)."""
    assert model.minimize
    x = [Q(v) for v in sol.x]
    y = [Q(d) for d in sol.duals]
    # primal feasibility
    for v, xv in zip(model.vars, x):
        assert xv >= Q(v.lb)
        if v.ub is not None:
            assert xv <= Q(v.ub)
    for r, yr in zip(model.rows, y):
        lhs = sum(Q(a) * x[j] for j, a in r.coeffs.items())
        if r.sense == LE:
            assert lhs <= Q(r.rhs)
            assert yr <= 0
            if yr != 0:
                assert lhs == Q(r.rhs)      # complementary slackness
        elif r.sense == GE:
            assert lhs >= Q(r.rhs)
            assert yr >= 0
            if yr != 0:
                assert lhs == Q(r.rhs)
        else:
            assert lhs == Q(r.rhs)
    # dual feasibility on reduced costs
    for j, v in enumerate(model.vars):
        rc = Q(v.cost)
        for ri, r in enumerate(model.rows):
            a = r.coeffs.get(j)
            if a:
                rc -= y[ri] * Q(a)
        at_lb = x[j] == Q(v.lb)
        at_ub = v.ub is not None and x[j] == Q(v.ub)
        if at_lb and at_ub:
            continue
        if at_lb:
            assert rc >= 0, (j, rc)
        elif at_ub:
            assert rc <= 0, (j, rc)
        else:
            assert rc == 0, (j, rc)
    # objective consistency
    obj = sum(Q(v.cost) * x[j] for j, v in enumerate(model.vars))
    assert obj == Q(sol.objective)


def test_spec_dual_convention():
    for backend in (RAT, HIG):
        m = LinearModel()
        m.add_var("x", cost=1)
        m.add_row({0: 1}, GE, 3)
        sol = backend.solve_lp(m)
        assert sol.status == "optimal"
        assert float(sol.objective) == pytest.approx(3.0, abs=1e-9)
        assert float(sol.duals[0]) == pytest.approx(1.0, abs=1e-9)


def test_le_dual_is_nonpositive():
    for backend in (RAT, HIG):
        m = LinearModel()
        m.add_var("x", cost=-1, ub=5)
        m.add_row({0: 1}, LE, 4)
        sol = backend.solve_lp(m)
        assert float(sol.objective) == pytest.approx(-4.0, abs=1e-9)
        assert float(sol.duals[0]) == pytest.approx(-1.0, abs=1e-9)


def test_maximize_mode():
    for backend in (RAT, HIG):
        m = LinearModel(minimize=False)
        m.add_var("x", cost=3, ub=2)
        m.add_var("y", cost=2)
        m.add_row({0: 1, 1: 1}, LE, 4)
        sol = backend.solve_lp(m)
        assert float(sol.objective) == pytest.approx(10.0, abs=1e-9)
        assert [round(float(v), 6) for v in sol.x] == [2, 2]


def test_unbounded_lp():
    m = LinearModel()
    m.add_var("x", cost=-1)
    assert RAT.solve_lp(m).status == "unbounded"


def test_infeasible_lp():
    for backend in (RAT, HIG):
        m = LinearModel()
        m.add_var("x", cost=1, ub=1)
        m.add_row({0: 1}, GE, 2)
        assert backend.solve_lp(m).status == "infeasible"


def _random_model(seed: int) -> LinearModel:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    mrows = int(rng.integers(1, 5))
    m = LinearModel(name=f"rand{seed}")
    for j in range(n):
        m.add_var(cost=int(rng.integers(-5, 6)), ub=int(rng.integers(2, 8)))
    for _ in range(mrows):
        coeffs = {j: int(rng.integers(-3, 4)) for j in range(n)}
        coeffs = {j: a for j, a in coeffs.items() if a}
        if not coeffs:
            coeffs = {0: 1}
        sense = [LE, GE, EQ][int(rng.integers(0, 3))]
        rhs = int(rng.integers(-4, 10))
        m.add_row(coeffs, sense, rhs)
    return m


@pytest.mark.parametrize("seed", range(40))
def test_random_lps_certified_and_matching(seed):
    model = _random_model(seed)
    rsol = RAT.solve_lp(model)
    hsol = HIG.solve_lp(model)
    assert rsol.status == hsol.status, (rsol.status, hsol.status)
    if rsol.status == "optimal":
        certify_lp_optimum(model, rsol)
        assert float(rsol.objective) == pytest.approx(float(hsol.objective), abs=1e-6)


def _brute_mip(model: LinearModel):
    ranges = [range(int(v.lb), int(v.ub) + 1) for v in model.vars]
    best = None
    for x in itertools.product(*ranges):
        ok = True
        for r in model.rows:
            lhs = sum(a * x[j] for j, a in r.coeffs.items())
            if r.sense == LE and lhs > r.rhs:
                ok = False
            elif r.sense == GE and lhs < r.rhs:
                ok = False
            elif r.sense == EQ and lhs != r.rhs:
                ok = False
            if not ok:
                break
        if ok:
            obj = sum(v.cost * x[j] for j, v in enumerate(model.vars))
            if best is None or obj < best:
                best = obj
    return best


@pytest.mark.parametrize("seed", range(25))
def test_random_mips_match_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    model = LinearModel()
    n = int(rng.integers(2, 5))
    for j in range(n):
        model.add_var(cost=int(rng.integers(-4, 6)), ub=int(rng.integers(1, 4)),
                      integer=True)
    for _ in range(int(rng.integers(1, 4))):
        coeffs = {j: int(rng.integers(-2, 4)) for j in range(n)}
        coeffs = {j: a for j, a in coeffs.items() if a} or {0: 1}
        model.add_row(coeffs, [LE, GE][int(rng.integers(0, 2))], int(rng.integers(0, 7)))
    want = _brute_mip(model)
    rsol = RAT.solve_mip(model)
    if want is None:
        assert rsol.status == "infeasible"
    else:
        assert rsol.status == "optimal"
        assert rsol.objective == want
        hsol = HIG.solve_mip(model)
        assert float(hsol.objective) == pytest.approx(float(want), abs=1e-6)


def test_mip_incumbent_does_not_change_answer():
    model = LinearModel()
    for cost in (3, 5, 4):
        model.add_var(cost=cost, ub=1, integer=True)
    model.add_row({0: 1, 1: 1, 2: 1}, GE, 2)
    plain = RAT.solve_mip(model)
    warm = RAT.solve_mip(model, incumbent=[1, 1, 1])
    assert plain.objective == warm.objective == 7


def test_fractional_lp_relaxation_vs_mip():
    # knapsack-ish: LP splits, MIP must not
    model = LinearModel()
    model.add_var(cost=-3, ub=1, integer=True)
    model.add_var(cost=-2, ub=1, integer=True)
    model.add_row({0: 2, 1: 2}, LE, 3)
    lp = RAT.solve_lp(model)
    assert lp.objective == Fraction(-4)          # x = (1, 1/2)
    mip = RAT.solve_mip(model)
    assert mip.objective == -3
    assert mip.bound == -3


def test_write_lp_format(tmp_path):
    model = LinearModel(name="demo")
    model.add_var("a", cost=2, ub=1, integer=True)
    model.add_var("b", cost=1)
    model.add_row({0: 1, 1: 1}, GE, 1, name="cover")
    text = model.write_lp(tmp_path / "demo.lp")
    assert "Minimize" in text and "cover:" in text and "General" in text
    assert (tmp_path / "demo.lp").read_text() == text


def test_backend_selection(monkeypatch):
    assert get_backend("rational").name == "rational"
    assert get_backend("highs").name == "highs"
    monkeypatch.setenv("COMMUTEPOOL_BACKEND", "highs")
    assert get_backend().name == "highs"
    monkeypatch.delenv("COMMUTEPOOL_BACKEND")
    assert get_backend().name == "rational"
    with pytest.raises(ValueError):
        get_backend("nope")
