"""Binary integer programs: variables, linear constraints, boolean helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

SENSES = ("<=", ">=", "=")


@dataclass
class Constraint:
    coeffs: dict
    sense: str
    rhs: int
    name: str = ""

    def satisfied(self, assign: dict) -> bool:
        lhs = sum(c * assign.get(v, 0) for v, c in self.coeffs.items())
        if self.sense == "<=":
            return lhs <= self.rhs + 1e-9
        if self.sense == ">=":
            return lhs >= self.rhs - 1e-9
        return abs(lhs - self.rhs) <= 1e-9


@dataclass
class IlpModel:
    """All variables are binary. ``meta`` carries decoding tables for the builders."""

    name: str = "model"
    sense: str = "min"
    objective: dict = field(default_factory=dict)
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {v: i for i, v in enumerate(self.variables)}

    def add_var(self, name: str) -> str:
        if name not in self._index:
            self._index[name] = len(self.variables)
            self.variables.append(name)
        return name

    def has_var(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def add_constraint(self, coeffs: dict, sense: str, rhs: int, name: Optional[str] = None) -> Constraint:
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        for v in coeffs:
            if v not in self._index:
                raise KeyError(f"undeclared variable {v}")
        c = Constraint({v: k for v, k in coeffs.items() if k}, sense, rhs, name or f"c{len(self.constraints)}")
        self.constraints.append(c)
        return c

    def fix(self, var: str, value: int) -> None:
        self.add_constraint({var: 1}, "=", value, f"fix_{var}")

    def add_and(self, x: str, literals) -> None:
        """x = AND of literals; a literal is ``(var, True)`` or ``(var, False)`` for its negation."""
        lits = list(literals)
        if not lits:
            self.fix(x, 1)
            return
        neg = 0
        big = {x: -1}
        for v, pos in lits:
            if pos:
                self.add_constraint({x: 1, v: -1}, "<=", 0)
                big[v] = big.get(v, 0) + 1
            else:
                self.add_constraint({x: 1, v: 1}, "<=", 1)
                big[v] = big.get(v, 0) - 1
                neg += 1
        # x >= sum(lits) - (n - 1), negated literal (1 - v)
        self.add_constraint(big, "<=", len(lits) - 1 - neg)

    def add_or(self, x: str, terms) -> None:
        """x = OR of variables (x = 0 when ``terms`` is empty)."""
        terms = list(terms)
        if not terms:
            self.fix(x, 0)
            return
        for v in terms:
            self.add_constraint({x: 1, v: -1}, ">=", 0)
        coeffs = {x: 1}
        for v in terms:
            coeffs[v] = coeffs.get(v, 0) - 1
        self.add_constraint(coeffs, "<=", 0)

    def objective_value(self, assign: dict) -> int:
        return sum(c * assign.get(v, 0) for v, c in self.objective.items())

    def violated(self, assign: dict) -> list:
        return [c for c in self.constraints if not c.satisfied(assign)]

    def copy(self) -> "IlpModel":
        m = IlpModel(self.name, self.sense, dict(self.objective), list(self.variables), list(self.constraints), dict(self.meta))
        return m


@dataclass
class IlpSolution:
    objective: Optional[int]
    assignment: dict
    status: str  # optimal | infeasible | iterationLimit
    nodes: int = 0

    def value(self, var: str) -> int:
        return self.assignment.get(var, 0)
