"""Solver-agnostic mixed-integer program representation."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable

from mipnn.errors import BuildError

BINARY, INTEGER, CONTINUOUS = "binary", "integer", "continuous"
SENSES = ("<=", ">=", "=")


class LinExpr:
    """Sparse linear expression ``sum(coef * var) + constant`` over variable ids."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms=None, constant: float = 0.0):
        self.terms: dict[int, float] = {}
        self.constant = float(constant)
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for var, coef in items:
                self.add_term(var, coef)

    def add_term(self, var: int, coef: float) -> "LinExpr":
        coef = float(coef)
        if coef != 0.0:
            new = self.terms.get(var, 0.0) + coef
            if new == 0.0:
                self.terms.pop(var, None)
            else:
                self.terms[var] = new
        return self

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for var, coef in other.terms.items():
                out.add_term(var, coef)
            out.constant += other.constant
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        scalar = float(scalar)
        if scalar == 0.0:
            return LinExpr()
        return LinExpr({v: c * scalar for v, c in self.terms.items()}, self.constant * scalar)

    __rmul__ = __mul__

    def value(self, assignment) -> float:
        return self.constant + sum(c * float(assignment[v]) for v, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*x{v}" for v, c in sorted(self.terms.items())]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


@dataclass(frozen=True)
class Variable:
    index: int
    name: str
    kind: str
    lb: float
    ub: float
    # network role: weight, bias, activation, connection, indicator, epigraph
    role: str = ""
    # branching stage (layer index for network parameters)
    stage: int = 0

    @property
    def is_integral(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coef * var) <sense> rhs`` with sorted, merged terms."""

    terms: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""

    @classmethod
    def from_expr(cls, expr: LinExpr, sense: str, rhs: float, name: str = "") -> "LinearConstraint":
        if sense not in SENSES:
            raise BuildError(f"unknown constraint sense {sense!r}")
        return cls(tuple(sorted(expr.terms.items())), sense, float(rhs) - expr.constant, name)

    def activity(self, assignment) -> float:
        return sum(c * float(assignment[v]) for v, c in self.terms)

    def violation(self, assignment) -> float:
        lhs = self.activity(assignment)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

    def __str__(self):
        body = " ".join(f"{c:+g} x{v}" for v, c in self.terms) or "0"
        return f"{body} {self.sense} {self.rhs:g}"


@dataclass(frozen=True)
class IndicatorConstraint:
    """``(guard == value) => constraint``.

    ``expr_bound`` optionally bounds ``|sum(coef * var)|`` of the implied
    constraint, which linearization uses as the big-M basis.
    """

    guard: int
    value: int
    constraint: LinearConstraint
    expr_bound: float | None = None

    @property
    def name(self) -> str:
        return self.constraint.name


@dataclass(frozen=True)
class Objective:
    sense: str
    expr: LinExpr

    def value(self, assignment) -> float:
        return self.expr.value(assignment)


@dataclass
class MipModel:
    name: str = "mipnn"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    indicators: list[IndicatorConstraint] = field(default_factory=list)
    objective: Objective = field(default_factory=lambda: Objective("min", LinExpr()))
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._names = {v.name: v.index for v in self.variables}

    # -- construction ---------------------------------------------------------

    def add_var(self, name: str, kind: str, lb: float = 0.0, ub: float = 1.0, role: str = "", stage: int = 0) -> int:
        if kind not in (BINARY, INTEGER, CONTINUOUS):
            raise BuildError(f"unknown variable kind {kind!r}")
        if name in self._names:
            raise BuildError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise BuildError(f"variable {name!r} has empty domain [{lb}, {ub}]")
        index = len(self.variables)
        self.variables.append(Variable(index, name, kind, float(lb), float(ub), role, stage))
        self._names[name] = index
        return index

    def add_constr(self, expr: LinExpr, sense: str, rhs: float, name: str = "") -> LinearConstraint:
        constr = LinearConstraint.from_expr(expr, sense, rhs, name)
        self._check_refs(constr)
        self.constraints.append(constr)
        return constr

    def add_indicator(
        self, guard: int, value: int, expr: LinExpr, sense: str, rhs: float, name: str = "", expr_bound=None
    ) -> IndicatorConstraint:
        if self.variables[guard].kind != BINARY:
            raise BuildError(f"indicator guard {self.variables[guard].name!r} is not binary")
        if value not in (0, 1):
            raise BuildError("indicator guard value must be 0 or 1")
        constr = LinearConstraint.from_expr(expr, sense, rhs, name)
        self._check_refs(constr)
        ind = IndicatorConstraint(guard, int(value), constr, expr_bound)
        self.indicators.append(ind)
        return ind

    def set_objective(self, sense: str, expr: LinExpr) -> None:
        if sense not in ("min", "max"):
            raise BuildError(f"objective sense must be 'min' or 'max', got {sense!r}")
        for var in expr.terms:
            self._check_var(var)
        self.objective = Objective(sense, expr)

    def _check_var(self, var):
        if not 0 <= var < len(self.variables):
            raise BuildError(f"reference to undeclared variable {var}")

    def _check_refs(self, constr: LinearConstraint):
        for var, _ in constr.terms:
            self._check_var(var)

    # -- queries --------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def var_index(self, name: str) -> int:
        return self._names[name]

    def has_var(self, name: str) -> bool:
        return name in self._names

    def vars_with_role(self, role: str) -> list[Variable]:
        return [v for v in self.variables if v.role == role]

    def copy(self) -> "MipModel":
        return copy.deepcopy(self)

    def objective_value(self, assignment) -> float:
        return self.objective.value(assignment)

    def max_violation(self, assignment, include_indicators: bool = True) -> float:
        """Largest violation of any constraint or variable bound."""
        worst = 0.0
        for var in self.variables:
            x = float(assignment[var.index])
            worst = max(worst, var.lb - x, x - var.ub)
        for constr in self.constraints:
            worst = max(worst, constr.violation(assignment))
        if include_indicators:
            for ind in self.indicators:
                if round(float(assignment[ind.guard])) == ind.value:
                    worst = max(worst, ind.constraint.violation(assignment))
        return worst

    def stats(self) -> dict:
        kinds = {BINARY: 0, INTEGER: 0, CONTINUOUS: 0}
        for v in self.variables:
            kinds[v.kind] += 1
        roles: dict[str, int] = {}
        for v in self.variables:
            roles[v.role] = roles.get(v.role, 0) + 1
        return {
            "variables": self.n_vars,
            "binary": kinds[BINARY],
            "integer": kinds[INTEGER],
            "continuous": kinds[CONTINUOUS],
            "linear_constraints": len(self.constraints),
            "indicator_constraints": len(self.indicators),
            "roles": roles,
        }

    def dump(self) -> str:
        """Human-readable listing of variables, constraints and objective."""
        name = lambda v: self.variables[v].name

        def fmt(terms):
            return " ".join(f"{c:+g} {name(v)}" for v, c in terms) or "0"

        lines = [f"model {self.name}"]
        for key, value in sorted(self.metadata.items()):
            lines.append(f"  meta {key} = {value}")
        lines.append(f"{self.objective.sense}imize {fmt(sorted(self.objective.expr.terms.items()))}")
        lines.append("variables")
        for v in self.variables:
            lines.append(f"  {v.name:<20} {v.kind:<10} [{v.lb:g}, {v.ub:g}] {v.role}")
        lines.append("constraints")
        for c in self.constraints:
            lines.append(f"  {c.name}: {fmt(c.terms)} {c.sense} {c.rhs:g}")
        if self.indicators:
            lines.append("indicators")
            for ind in self.indicators:
                c = ind.constraint
                lines.append(f"  {c.name}: {name(ind.guard)} = {ind.value} -> {fmt(c.terms)} {c.sense} {c.rhs:g}")
        return "\n".join(lines) + "\n"


def expr_range(model: MipModel, terms: Iterable[tuple[int, float]]) -> tuple[float, float]:
    """Interval of ``sum(coef * var)`` implied by the variable bounds."""
    lo = hi = 0.0
    for var, coef in terms:
        v = model.variables[var]
        a, b = coef * v.lb, coef * v.ub
        lo += min(a, b)
        hi += max(a, b)
        if math.isnan(lo) or math.isnan(hi):
            return -math.inf, math.inf
    return lo, hi
