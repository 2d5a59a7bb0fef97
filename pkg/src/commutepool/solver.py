"""Solver backends behind one model type.

``LinearModel`` is a tiny row-wise LP/MIP description.  Two backends solve
it: the bundled exact rational simplex (deterministic, certificate-grade,
desk scale) and SciPy's HiGHS wrappers (floating point, scales further).
Pick one explicitly or through the COMMUTEPOOL_BACKEND environment
variable; the default is the rational backend.

Both backends report duals in the same convention: reduced cost of a
variable is cost minus dual-weighted column, a binding >= row in a
minimisation carries a nonnegative dual.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .simplex import (EQ, GE, LE, MIPResult, Q, RationalSimplex, is_integral)

Number = Union[int, float, object]

DEFAULT_BACKEND_ENV = "COMMUTEPOOL_BACKEND"


@dataclass
class Variable:
    name: str
    cost: Number = 0
    lb: Number = 0
    ub: Optional[Number] = None
    integer: bool = False


@dataclass
class Row:
    name: str
    coeffs: Dict[int, Number]
    sense: str
    rhs: Number


@dataclass
class Solution:
    status: str                        # optimal | feasible | infeasible | unbounded | limit
    objective: Optional[Number]
    x: List[Number]
    duals: Optional[List[Number]] = None
    bound: Optional[Number] = None
    nodes: int = 0
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


class LinearModel:
    """min (or max) c.x subject to rows and variable boxes."""

    def __init__(self, name: str = "model", minimize: bool = True):
        self.name = name
        self.minimize = minimize
        self.vars: List[Variable] = []
        self.rows: List[Row] = []

    def add_var(self, name: Optional[str] = None, cost: Number = 0,
                lb: Number = 0, ub: Optional[Number] = None,
                integer: bool = False) -> int:
        if name is None:
            name = f"x{len(self.vars)}"
        self.vars.append(Variable(name, cost, lb, ub, integer))
        return len(self.vars) - 1

    def add_row(self, coeffs: Dict[int, Number], sense: str, rhs: Number,
                name: Optional[str] = None) -> int:
        if name is None:
            name = f"r{len(self.rows)}"
        self.rows.append(Row(name, dict(coeffs), sense, rhs))
        return len(self.rows) - 1

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def integer_indices(self) -> List[int]:
        return [j for j, v in enumerate(self.vars) if v.integer]

    # -- LP text export ---------------------------------------------------

    def write_lp(self, path=None) -> str:
        """CPLEX-style LP text; returns the string, optionally writes it."""
        buf = io.StringIO()
        buf.write(f"\\ {self.name}\n")
        buf.write("Minimize\n" if self.minimize else "Maximize\n")
        terms = [f"{float(v.cost):+g} {v.name}" for v in self.vars if v.cost]
        buf.write(" obj: " + (" ".join(terms) if terms else "0 " + self.vars[0].name) + "\n")
        buf.write("Subject To\n")
        for r in self.rows:
            parts = " ".join(f"{float(a):+g} {self.vars[j].name}"
                             for j, a in sorted(r.coeffs.items()) if a)
            op = {LE: "<=", GE: ">=", EQ: "="}[r.sense]
            buf.write(f" {r.name}: {parts} {op} {float(r.rhs):g}\n")
        buf.write("Bounds\n")
        for v in self.vars:
            hi = "+inf" if v.ub is None else f"{float(v.ub):g}"
            buf.write(f" {float(v.lb):g} <= {v.name} <= {hi}\n")
        ints = [v.name for v in self.vars if v.integer]
        if ints:
            buf.write("General\n " + " ".join(ints) + "\n")
        buf.write("End\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def as_float(v: Number) -> float:
    return float(v)


# ---------------------------------------------------------------------------
# exact rational backend
# ---------------------------------------------------------------------------

class RationalBackend:
    name = "rational"
    exact = True

    def _build(self, model: LinearModel) -> RationalSimplex:
        sx = RationalSimplex()
        sgn = 1 if model.minimize else -1
        for v in model.vars:
            sx.add_var(cost=sgn * Q(v.cost) if v.cost else 0, lb=v.lb, ub=v.ub)
        for r in model.rows:
            sx.add_row(r.coeffs, r.sense, r.rhs)
        return sx

    def solve_lp(self, model: LinearModel) -> Solution:
        res = self._build(model).solve()
        if res.status != "optimal":
            return Solution(res.status, None, [], None, iterations=res.iterations)
        sgn = 1 if model.minimize else -1
        return Solution("optimal", sgn * res.objective, res.x,
                        [sgn * d for d in res.duals], iterations=res.iterations)

    def solve_mip(self, model: LinearModel, time_limit_s: Optional[float] = None,
                  incumbent: Optional[Sequence[Number]] = None) -> Solution:
        sx = self._build(model)
        res: MIPResult = sx.solve_mip(model.integer_indices(),
                                      time_limit_s=time_limit_s,
                                      incumbent_x=incumbent)
        sgn = 1 if model.minimize else -1
        if res.objective is None:
            return Solution(res.status, None, [], None,
                            bound=None if res.bound is None else sgn * res.bound,
                            nodes=res.nodes)
        return Solution(res.status, sgn * res.objective, res.x,
                        bound=None if res.bound is None else sgn * res.bound,
                        nodes=res.nodes)


# ---------------------------------------------------------------------------
# SciPy / HiGHS backend
# ---------------------------------------------------------------------------

class _CooBlock:
    """Accumulates one constraint block as COO triplets."""

    def __init__(self):
        self.data: List[float] = []
        self.ri: List[int] = []
        self.ci: List[int] = []
        self.rhs: List[float] = []

    def add_row(self, coeffs: Dict[int, Number], rhs: float, sign: float) -> None:
        k = len(self.rhs)
        for j, a in coeffs.items():
            if a:
                self.ri.append(k)
                self.ci.append(j)
                self.data.append(sign * float(a))
        self.rhs.append(sign * rhs)

    def build(self, csr_array, num_vars: int):
        if not self.rhs:
            return None, None
        mat = csr_array((self.data, (self.ri, self.ci)),
                        shape=(len(self.rhs), num_vars))
        return mat, np.array(self.rhs)


class HighsBackend:
    name = "highs"
    exact = False

    def _arrays(self, model: LinearModel):
        """Cost vector, bounds, and sparse <=/== blocks (GE folded into <=)."""
        from scipy.sparse import csr_array

        n = model.num_vars
        c = np.array([float(v.cost) for v in model.vars])
        if not model.minimize:
            c = -c
        bounds = [(float(v.lb), None if v.ub is None else float(v.ub))
                  for v in model.vars]
        ub = _CooBlock()
        eq = _CooBlock()
        map_ub, map_eq = [], []                     # (row index, sign) / row index
        for ri, r in enumerate(model.rows):
            if r.sense == EQ:
                eq.add_row(r.coeffs, float(r.rhs), 1.0)
                map_eq.append(ri)
            elif r.sense == LE:
                ub.add_row(r.coeffs, float(r.rhs), 1.0)
                map_ub.append((ri, 1.0))
            else:                                   # GE becomes -row <= -rhs
                ub.add_row(r.coeffs, float(r.rhs), -1.0)
                map_ub.append((ri, -1.0))
        A_ub, b_ub = ub.build(csr_array, n)
        A_eq, b_eq = eq.build(csr_array, n)
        return c, bounds, A_ub, b_ub, map_ub, A_eq, b_eq, map_eq

    def solve_lp(self, model: LinearModel) -> Solution:
        from scipy.optimize import linprog
        c, bounds, A_ub, b_ub, map_ub, A_eq, b_eq, map_eq = self._arrays(model)
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        if res.status == 2:
            return Solution("infeasible", None, [])
        if res.status == 3:
            return Solution("unbounded", None, [])
        if not res.success:
            return Solution("limit", None, [])
        duals = [0.0] * model.num_rows
        if map_ub:
            for (ri, sign), marg in zip(map_ub, res.ineqlin.marginals):
                duals[ri] = sign * float(marg)
        if map_eq:
            for ri, marg in zip(map_eq, res.eqlin.marginals):
                duals[ri] = float(marg)
        sgn = 1.0 if model.minimize else -1.0
        return Solution("optimal", sgn * float(res.fun), list(res.x),
                        [sgn * d for d in duals],
                        iterations=int(getattr(res, "nit", 0)))

    def solve_mip(self, model: LinearModel, time_limit_s: Optional[float] = None,
                  incumbent: Optional[Sequence[Number]] = None) -> Solution:
        from scipy.optimize import Bounds, LinearConstraint, milp

        c, bounds, A_ub, b_ub, map_ub, A_eq, b_eq, map_eq = self._arrays(model)
        cons = []
        if A_ub is not None:
            cons.append(LinearConstraint(A_ub, -np.inf, b_ub))
        if A_eq is not None:
            cons.append(LinearConstraint(A_eq, b_eq, b_eq))
        integrality = np.array([1 if v.integer else 0 for v in model.vars])
        lo = np.array([b[0] for b in bounds])
        hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
        options = {}
        if time_limit_s is not None:
            options["time_limit"] = float(time_limit_s)
        res = milp(c, constraints=cons, integrality=integrality,
                   bounds=Bounds(lo, hi), options=options)
        sgn = 1.0 if model.minimize else -1.0
        if res.status == 2:
            return Solution("infeasible", None, [])
        if res.x is None:
            # no feasible point found within limits
            return Solution("limit", None, [],
                            bound=None if res.mip_dual_bound is None
                            else sgn * float(res.mip_dual_bound))
        status = "optimal" if res.status == 0 else "feasible"
        return Solution(status, sgn * float(res.fun), list(res.x),
                        bound=sgn * float(res.mip_dual_bound)
                        if res.mip_dual_bound is not None else None,
                        nodes=int(getattr(res, "mip_node_count", 0) or 0))


_BACKENDS = {"rational": RationalBackend, "highs": HighsBackend}


def get_backend(name: Optional[str] = None):
    """Backend instance by name, falling back to $COMMUTEPOOL_BACKEND."""
    if name is None:
        name = os.environ.get(DEFAULT_BACKEND_ENV, "rational")
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
