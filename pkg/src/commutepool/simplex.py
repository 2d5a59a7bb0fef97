"""Exact rational simplex and branch & bound.

A bounded-variable two-phase revised simplex over exact rationals (gmpy2's
mpq when available, fractions.Fraction otherwise), with the explicit basis
inverse kept densely.  Written for the desk-scale problems this package
solves: hundreds of rows, a few hundred columns.  Determinism matters more
than raw speed here — pivoting rules break ties by smallest index, so a
given model always walks the same path.

Dual convention: row duals ``y`` satisfy reduced cost = c_j - y . A_j, so
for a minimisation a binding >= row has y >= 0 (min x s.t. x >= 3 gives
objective 3 and dual 1) and a binding <= row has y <= 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

try:
    from gmpy2 import mpq as _mpq

    def Q(x=0, y=1):
        return _mpq(x, y)

    def is_integral(q) -> bool:
        return q.denominator == 1
except ImportError:                                        # pragma: no cover
    def Q(x=0, y=1):
        return Fraction(x, y)

    def is_integral(q) -> bool:
        return q.denominator == 1

ZERO = Q(0)
ONE = Q(1)

LE, GE, EQ = "<=", ">=", "=="

#: iterations of no objective progress before switching to Bland's rule
_STALL_LIMIT = 60


class SimplexError(Exception):
    pass


@dataclass
class LPResult:
    status: str                       # optimal | infeasible | unbounded
    objective: Optional[object]       # exact rational
    x: List[object]
    duals: List[object]
    iterations: int = 0


@dataclass
class MIPResult:
    status: str                       # optimal | feasible | infeasible | limit
    objective: Optional[object]
    x: List[object]
    bound: Optional[object]           # best proven lower bound
    nodes: int = 0


def _to_q(v):
    if isinstance(v, float):
        return Q(Fraction(v).limit_denominator(10 ** 12))
    return Q(v)


class RationalSimplex:
    """One LP in computational form: min c.x, rows with senses, boxed vars.

    Columns are sparse (row, coeff) lists.  Upper bounds of None mean
    +infinity; lower bounds must be finite.
    """

    def __init__(self):
        self.cols: List[List[Tuple[int, object]]] = []
        self.cost: List[object] = []
        self.lb: List[object] = []
        self.ub: List[Optional[object]] = []
        self.rhs: List[object] = []
        self.sense: List[str] = []

    def add_var(self, cost=0, lb=0, ub=None) -> int:
        self.cols.append([])
        self.cost.append(_to_q(cost))
        self.lb.append(_to_q(lb))
        self.ub.append(None if ub is None else _to_q(ub))
        return len(self.cols) - 1

    def add_row(self, coeffs: Dict[int, object], sense: str, rhs) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        r = len(self.rhs)
        for j, a in coeffs.items():
            q = _to_q(a)
            if q != 0:
                self.cols[j].append((r, q))
        self.rhs.append(_to_q(rhs))
        self.sense.append(sense)
        return r

    # -- core -------------------------------------------------------------

    def solve(self, bound_overrides: Optional[Dict[int, Tuple[object, Optional[object]]]] = None
              ) -> LPResult:
        nstruct = len(self.cols)
        m = len(self.rhs)
        cols = [list(c) for c in self.cols]
        cost = list(self.cost)
        lb = list(self.lb)
        ub = list(self.ub)
        if bound_overrides:
            for j, (lo, hi) in bound_overrides.items():
                lb[j] = _to_q(lo)
                ub[j] = None if hi is None else _to_q(hi)
        for j in range(nstruct):
            if ub[j] is not None and ub[j] < lb[j]:
                return LPResult("infeasible", None, [], [])

        # slacks: <= rows get +1, >= rows get -1, both in [0, inf)
        slack_of: Dict[int, int] = {}
        for r, s in enumerate(self.sense):
            if s == EQ:
                continue
            j = len(cols)
            cols.append([(r, ONE if s == LE else -ONE)])
            cost.append(ZERO)
            lb.append(ZERO)
            ub.append(None)
            slack_of[r] = j

        ntot = len(cols)
        # residual of each row with structurals at their finite bounds
        start_val = [lb[j] for j in range(ntot)]
        resid = list(self.rhs)
        for j in range(ntot):
            v = start_val[j]
            if v != 0:
                for r, a in cols[j]:
                    resid[r] -= a * v

        # one artificial per row, signed so its start value is >= 0; the
        # initial basis inverse is the matching signed diagonal
        art0 = len(cols)
        basis: List[int] = []
        signs: List[object] = []
        for r in range(m):
            sgn = ONE if resid[r] >= 0 else -ONE
            j = len(cols)
            cols.append([(r, sgn)])
            cost.append(ZERO)
            lb.append(ZERO)
            ub.append(None)
            start_val.append(abs(resid[r]))
            basis.append(j)
            signs.append(sgn)

        nall = len(cols)
        at_upper = [False] * nall
        in_basis = [False] * nall
        for j in basis:
            in_basis[j] = True
        binv = [[signs[r] if i == r else ZERO for i in range(m)] for r in range(m)]
        xb = [start_val[j] for j in basis]

        phase_cost = [ZERO] * nall
        for j in range(art0, nall):
            phase_cost[j] = ONE

        def nb_value(j):
            if at_upper[j]:
                return ub[j]
            return lb[j]

        def recompute_xb():
            r0 = list(self.rhs)
            for j in range(nall):
                if in_basis[j]:
                    continue
                v = nb_value(j)
                if v != 0:
                    for r, a in cols[j]:
                        r0[r] -= a * v
            for i in range(m):
                row = binv[i]
                acc = ZERO
                for r in range(m):
                    if row[r] != 0:
                        acc += row[r] * r0[r]
                xb[i] = acc

        iterations = 0

        def run_phase(cvec) -> str:
            nonlocal iterations
            stall = 0
            last_obj = None
            while True:
                iterations += 1
                if iterations > 20000 + 200 * (m + nall):
                    raise SimplexError("iteration limit exceeded")
                # duals y = c_B . B^-1
                y = [ZERO] * m
                for i, j in enumerate(basis):
                    cj = cvec[j]
                    if cj != 0:
                        row = binv[i]
                        for r in range(m):
                            if row[r] != 0:
                                y[r] += cj * row[r]
                obj = ZERO
                for i, j in enumerate(basis):
                    if cvec[j] != 0:
                        obj += cvec[j] * xb[i]
                for j in range(nall):
                    if not in_basis[j]:
                        v = nb_value(j)
                        if v and cvec[j] != 0:
                            obj += cvec[j] * v
                if last_obj is not None and obj >= last_obj:
                    stall += 1
                else:
                    stall = 0
                last_obj = obj
                bland = stall > _STALL_LIMIT

                # pricing
                enter = -1
                best = ZERO
                enter_up = False
                for j in range(nall):
                    if in_basis[j]:
                        continue
                    if lb[j] == ub[j]:
                        continue                     # pinned, never moves
                    rc = cvec[j]
                    for r, a in cols[j]:
                        if y[r] != 0:
                            rc -= y[r] * a
                    if not at_upper[j] and rc < 0:
                        score = -rc
                    elif at_upper[j] and rc > 0:
                        score = rc
                    else:
                        continue
                    if bland:
                        enter = j
                        enter_up = not at_upper[j]
                        break
                    if score > best:
                        best = score
                        enter = j
                        enter_up = not at_upper[j]
                if enter < 0:
                    return "optimal"

                # direction d = B^-1 A_enter
                d = [ZERO] * m
                for r, a in cols[enter]:
                    for i in range(m):
                        if binv[i][r] != 0:
                            d[i] += binv[i][r] * a

                # ratio test; moving up from lb or down from ub
                span = None
                if ub[enter] is not None:
                    span = ub[enter] - lb[enter]
                t_best = span
                leave = -1
                leave_to_upper = False
                for i in range(m):
                    di = d[i] if enter_up else -d[i]
                    if di > 0:
                        limit = (xb[i] - lb[basis[i]]) / di
                        to_upper = False
                    elif di < 0:
                        if ub[basis[i]] is None:
                            continue
                        limit = (ub[basis[i]] - xb[i]) / (-di)
                        to_upper = True
                    else:
                        continue
                    if t_best is None or limit < t_best or \
                            (limit == t_best and (leave < 0 or basis[i] < basis[leave])):
                        t_best = limit
                        leave = i
                        leave_to_upper = to_upper
                if t_best is None:
                    return "unbounded"

                if leave < 0:
                    # bound flip, basis unchanged; basic values shift by the
                    # full span along the precomputed direction
                    delta = span if enter_up else -span
                    if delta != 0:
                        for i in range(m):
                            if d[i] != 0:
                                xb[i] -= d[i] * delta
                    at_upper[enter] = enter_up
                    continue

                # pivot: 'enter' replaces basis[leave]
                out = basis[leave]
                in_basis[out] = False
                at_upper[out] = leave_to_upper and ub[out] is not None
                basis[leave] = enter
                in_basis[enter] = True
                piv = d[leave]
                if piv == 0:
                    raise SimplexError("zero pivot")
                # basic values move t_best along d; the entering variable
                # takes the vacated slot
                delta = t_best if enter_up else -t_best
                enter_val = nb_value(enter) + delta
                if delta != 0:
                    for i in range(m):
                        if d[i] != 0:
                            xb[i] -= d[i] * delta
                xb[leave] = enter_val
                prow = binv[leave]
                inv_piv = ONE / piv
                for r in range(m):
                    if prow[r] != 0:
                        prow[r] *= inv_piv
                for i in range(m):
                    if i != leave and d[i] != 0:
                        f = d[i]
                        row = binv[i]
                        for r in range(m):
                            if prow[r] != 0:
                                row[r] -= f * prow[r]

        recompute_xb()
        status = run_phase(phase_cost)
        if status != "optimal":
            return LPResult(status, None, [], [], iterations)
        art_sum = ZERO
        for i, j in enumerate(basis):
            if j >= art0:
                art_sum += xb[i]
        if art_sum > 0:
            return LPResult("infeasible", None, [], [], iterations)
        for j in range(art0, nall):
            ub[j] = ZERO                                   # pin artificials

        full_cost = [ZERO] * nall
        for j in range(nstruct):
            full_cost[j] = cost[j]
        status = run_phase(full_cost)
        if status != "optimal":
            return LPResult(status, None, [], [], iterations)

        x = [ZERO] * nall
        for j in range(nall):
            if not in_basis[j]:
                x[j] = nb_value(j)
        for i, j in enumerate(basis):
            x[j] = xb[i]
        obj = ZERO
        for j in range(nstruct):
            if x[j] != 0 and full_cost[j] != 0:
                obj += full_cost[j] * x[j]
        y = [ZERO] * m
        for i, j in enumerate(basis):
            cj = full_cost[j]
            if cj != 0:
                row = binv[i]
                for r in range(m):
                    if row[r] != 0:
                        y[r] += cj * row[r]
        return LPResult("optimal", obj, x[:nstruct], y, iterations)

    # -- branch & bound ---------------------------------------------------

    def solve_mip(self, integers: Sequence[int],
                  time_limit_s: Optional[float] = None,
                  node_limit: int = 200_000,
                  incumbent_x: Optional[Sequence[object]] = None,
                  log: Optional[Callable[[str], None]] = None) -> MIPResult:
        """Depth-first branch & bound over the integer variables.

        ``incumbent_x`` may carry a known-feasible structural solution whose
        objective primes the pruning bound.
        """
        integers = sorted(set(integers))
        t0 = time.monotonic()
        best_x: Optional[List[object]] = None
        best_obj = None
        if incumbent_x is not None:
            best_obj = ZERO
            for j, v in enumerate(incumbent_x):
                best_obj += self.cost[j] * _to_q(v)
            best_x = [_to_q(v) for v in incumbent_x]

        root = self.solve()
        if root.status == "infeasible":
            return MIPResult("infeasible", None, [], None, 1)
        if root.status != "optimal":
            return MIPResult(root.status, None, [], None, 1)
        root_bound = root.objective

        stack: List[Tuple[Dict[int, Tuple[object, Optional[object]]], LPResult]] = [({}, root)]
        nodes = 0
        timed_out = False
        while stack:
            overrides, res = stack.pop()
            nodes += 1
            if node_limit and nodes > node_limit:
                timed_out = True
                break
            if time_limit_s is not None and time.monotonic() - t0 > time_limit_s:
                timed_out = True
                break
            if res.status == "infeasible":
                continue
            if res.status != "optimal":
                raise SimplexError(f"unbounded node in branch & bound")
            if best_obj is not None and res.objective >= best_obj:
                continue
            # branch on the most fractional integer variable
            frac_j = -1
            frac_score = None
            for j in integers:
                v = res.x[j]
                if not is_integral(v):
                    fpart = v - (v.numerator // v.denominator)
                    score = -abs(fpart - Q(1, 2))
                    if frac_score is None or score > frac_score:
                        frac_j = j
                        frac_score = score
            if frac_j < 0:
                best_obj = res.objective
                best_x = list(res.x)
                if log:
                    log(f"incumbent {float(best_obj):.6g} after {nodes} nodes")
                continue
            v = res.x[frac_j]
            fl = v.numerator // v.denominator
            base_lb, base_ub = overrides.get(frac_j, (self.lb[frac_j], self.ub[frac_j]))
            lo_over = dict(overrides)
            lo_over[frac_j] = (base_lb, Q(fl))
            hi_over = dict(overrides)
            hi_over[frac_j] = (Q(fl + 1), base_ub)
            children = []
            for ov in (lo_over, hi_over):
                child = self.solve(ov)
                children.append((ov, child))
            # explore the more promising child first (popped last)
            children.sort(key=lambda t: (t[1].objective is None,
                                         t[1].objective if t[1].objective is not None else 0),
                          reverse=True)
            for ov, child in children:
                if child.status == "optimal" and \
                        (best_obj is None or child.objective < best_obj):
                    stack.append((ov, child))
                elif child.status == "infeasible":
                    pass
                elif child.status != "optimal":
                    raise SimplexError("unbounded child in branch & bound")

        if best_x is None:
            if timed_out:
                return MIPResult("limit", None, [], root_bound, nodes)
            return MIPResult("infeasible", None, [], root_bound, nodes)
        status = "feasible" if timed_out else "optimal"
        bound = best_obj if status == "optimal" else root_bound
        return MIPResult(status, best_obj, best_x, bound, nodes)
