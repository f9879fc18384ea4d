"""Branch-and-bound over LP relaxations for small binary programs.

Relaxations are solved with scipy's HiGHS LP backend; branching is
depth-first on the most fractional variable (lowest index on ties), which
keeps results deterministic for a fixed variable order.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ..errors import Infeasible, IterationLimit
from .model import IlpModel, IlpSolution

NODE_BUDGET = 1_000_000
EPS = 1e-6


def _matrices(model: IlpModel):
    n = len(model.variables)
    rows_ub, rows_eq = [], []
    for con in model.constraints:
        row = {model.index(v): float(c) for v, c in con.coeffs.items()}
        if con.sense == "<=":
            rows_ub.append((row, float(con.rhs)))
        elif con.sense == ">=":
            rows_ub.append(({i: -c for i, c in row.items()}, -float(con.rhs)))
        else:
            rows_eq.append((row, float(con.rhs)))

    def build(rows):
        if not rows:
            return None, None
        data, ri, ci = [], [], []
        for r, (row, _) in enumerate(rows):
            for i, c in row.items():
                ri.append(r)
                ci.append(i)
                data.append(c)
        return csr_matrix((data, (ri, ci)), shape=(len(rows), n)), np.array([b for _, b in rows])

    a_ub, b_ub = build(rows_ub)
    a_eq, b_eq = build(rows_eq)
    c = np.zeros(n)
    for v, k in model.objective.items():
        c[model.index(v)] = float(k)
    if model.sense == "max":
        c = -c
    return c, a_ub, b_ub, a_eq, b_eq


def solve(model: IlpModel, node_budget: int = NODE_BUDGET, raise_on_limit: bool = True) -> IlpSolution:
    """Solve ``model`` to optimality.

    Raises ``Infeasible`` when no 0/1 assignment satisfies the constraints
    and ``IterationLimit`` when the node budget runs out (the exception's
    ``solution`` attribute holds the best incumbent, if any).
    """
    n = len(model.variables)
    if n == 0:
        if any(not con.satisfied({}) for con in model.constraints):
            raise Infeasible(model.name)
        return IlpSolution(0, {}, "optimal", 0)
    c, a_ub, b_ub, a_eq, b_eq = _matrices(model)
    integral_obj = all(float(k).is_integer() for k in model.objective.values())

    best_val, best_x = math.inf, None
    stack = [(np.zeros(n), np.ones(n))]
    nodes = 0
    while stack:
        lo, hi = stack.pop()
        nodes += 1
        if nodes > node_budget:
            sol = _solution(model, best_x, best_val, "iterationLimit", nodes)
            if raise_on_limit:
                err = IterationLimit(f"{model.name}: branch-and-bound budget of {node_budget} nodes exhausted")
                err.solution = sol
                raise err
            return sol
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=np.column_stack([lo, hi]), method="highs")
        if res.status == 2:
            continue
        if res.status != 0:
            raise RuntimeError(f"LP relaxation failed: {res.message}")
        bound = res.fun
        if integral_obj:
            bound = math.ceil(bound - EPS)
        if bound >= best_val - (0.5 if integral_obj else EPS):
            continue
        x = res.x
        frac = np.abs(x - np.round(x))
        j = int(np.argmax(frac))
        if frac[j] <= EPS:
            xr = np.round(x)
            best_val, best_x = float(c @ xr), xr
            continue
        # branch toward the nearer integer first (pushed last, popped first)
        first = 1.0 if x[j] >= 0.5 else 0.0
        for val in (1.0 - first, first):
            nlo, nhi = lo.copy(), hi.copy()
            nlo[j] = nhi[j] = val
            stack.append((nlo, nhi))
    if best_x is None:
        raise Infeasible(model.name)
    return _solution(model, best_x, best_val, "optimal", nodes)


def _solution(model, x, val, status, nodes) -> IlpSolution:
    if x is None:
        return IlpSolution(None, {}, status, nodes)
    assign = {v: int(round(x[i])) for i, v in enumerate(model.variables)}
    obj = model.objective_value(assign)
    return IlpSolution(obj, assign, status, nodes)
