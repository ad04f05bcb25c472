"""Mixed-integer linear models: variables, rows, relaxation and evaluation.

Models are immutable values. Operations that "change" a model return a new
one, so branch-and-bound nodes can share a parent model and carry only
bound deltas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .lp import COMPARATORS, EQ, GE, INF, LE, DenseLinearProgram

CONTINUOUS, INTEGER, BINARY = "continuous", "integer", "binary"
DOMAINS = (CONTINUOUS, INTEGER, BINARY)
MINIMIZE, MAXIMIZE = "minimize", "maximize"

INTEGRALITY_TOL = 1e-6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class VariableDef:
    name: str
    domain: str = CONTINUOUS
    lower: float = 0.0
    upper: float = INF
    objective_coeff: float = 0.0

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ModelError(f"variable {self.name!r}: unknown domain {self.domain!r}")
        if self.lower > self.upper:
            raise ModelError(f"variable {self.name!r}: lower {self.lower} > upper {self.upper}")
        if self.domain == BINARY and (self.lower < 0 or self.upper > 1):
            raise ModelError(f"binary variable {self.name!r} must have bounds within [0, 1]")

    @property
    def is_integer(self) -> bool:
        return self.domain != CONTINUOUS


@dataclass(frozen=True)
class LinearConstraintDef:
    """``sum(coeff * x[index]) <comparator> rhs``.

    Duplicate indices are merged and zero coefficients dropped on
    construction; ``terms`` ends up sorted by variable index.
    """

    terms: tuple[tuple[int, float], ...]
    comparator: str
    rhs: float
    label: str = ""

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ModelError(f"unknown comparator {self.comparator!r}")
        merged: dict[int, float] = {}
        for index, coeff in self.terms:
            index = int(index)
            if index < 0:
                raise ModelError(f"negative variable index {index}")
            merged[index] = merged.get(index, 0.0) + float(coeff)
        terms = tuple(sorted((i, c) for i, c in merged.items() if c != 0.0))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "rhs", float(self.rhs))

    def lhs(self, values: Sequence[float]) -> float:
        return math.fsum(c * values[i] for i, c in self.terms)

    def violation(self, values: Sequence[float]) -> float:
        """Amount by which ``values`` violate the row (0 when satisfied)."""
        lhs = self.lhs(values)
        if self.comparator == LE:
            return max(0.0, lhs - self.rhs) if self.rhs < INF else 0.0
        if self.comparator == GE:
            return max(0.0, self.rhs - lhs) if self.rhs > -INF else 0.0
        return abs(lhs - self.rhs)

    def max_index(self) -> int:
        return self.terms[-1][0] if self.terms else -1


def constraint(coeffs: dict[int, float] | Iterable[tuple[int, float]], comparator: str,
               rhs: float, label: str = "") -> LinearConstraintDef:
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    return LinearConstraintDef(tuple(items), comparator, rhs, label)


@dataclass(frozen=True)
class ModelDef:
    sense: str
    variables: tuple[VariableDef, ...]
    constraints: tuple[LinearConstraintDef, ...] = ()

    def __post_init__(self):
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ModelError(f"unknown sense {self.sense!r}")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.variables:
            raise ModelError("a model needs at least one variable")
        n = len(self.variables)
        for row in self.constraints:
            if row.max_index() >= n:
                raise ModelError(
                    f"constraint {row.label!r} references variable {row.max_index()} "
                    f"of a {n}-variable model")

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_integer(self) -> int:
        return sum(v.is_integer for v in self.variables)

    def objective_vector(self) -> np.ndarray:
        return np.array([v.objective_coeff for v in self.variables], dtype=float)

    def objective_value(self, values: Sequence[float]) -> float:
        return math.fsum(v.objective_coeff * x for v, x in zip(self.variables, values))

    def index_of(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Assignment:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class Evaluation:
    feasible: bool
    objective: float
    integral: bool
    worst_violation: float = field(default=0.0, compare=False)


def relax(model: ModelDef) -> ModelDef:
    """Same model with every integer or binary variable made continuous."""
    if all(not v.is_integer for v in model.variables):
        return model
    variables = tuple(replace(v, domain=CONTINUOUS) if v.is_integer else v
                      for v in model.variables)
    return replace(model, variables=variables)


def to_lp(model: ModelDef) -> DenseLinearProgram:
    """Dense matrix form; integrality is ignored."""
    n = model.num_vars
    A = np.zeros((len(model.constraints), n))
    for r, row in enumerate(model.constraints):
        for i, c in row.terms:
            A[r, i] = c
    return DenseLinearProgram(
        model.objective_vector(), A,
        tuple(row.comparator for row in model.constraints),
        [row.rhs for row in model.constraints],
        [v.lower for v in model.variables],
        [v.upper for v in model.variables],
        model.sense,
    )


def evaluate(model: ModelDef, assignment: Assignment | Sequence[float],
             tol: float = INTEGRALITY_TOL) -> Evaluation:
    values = tuple(assignment)
    if len(values) != model.num_vars:
        raise ModelError(
            f"assignment has {len(values)} values, model has {model.num_vars} variables")
    worst = 0.0
    integral = True
    for v, x in zip(model.variables, values):
        if v.lower > -INF:
            worst = max(worst, v.lower - x)
        if v.upper < INF:
            worst = max(worst, x - v.upper)
        if v.is_integer and abs(x - round(x)) > tol:
            integral = False
    for row in model.constraints:
        worst = max(worst, row.violation(values))
    return Evaluation(worst <= tol, model.objective_value(values), integral, worst)


def add_constraint(model: ModelDef, row: LinearConstraintDef) -> ModelDef:
    if row.max_index() >= model.num_vars:
        raise ModelError(
            f"constraint references variable {row.max_index()} "
            f"of a {model.num_vars}-variable model")
    return replace(model, constraints=model.constraints + (row,))


def add_constraints(model: ModelDef, rows: Iterable[LinearConstraintDef]) -> ModelDef:
    rows = tuple(rows)
    for row in rows:
        if row.max_index() >= model.num_vars:
            raise ModelError(f"constraint {row.label!r} has an out-of-range index")
    return replace(model, constraints=model.constraints + rows)


def objective_zeroed(model: ModelDef) -> ModelDef:
    return replace(model, variables=tuple(replace(v, objective_coeff=0.0)
                                          for v in model.variables))


__all__ = [
    "CONTINUOUS", "INTEGER", "BINARY", "MINIMIZE", "MAXIMIZE", "LE", "GE", "EQ",
    "INTEGRALITY_TOL", "ModelError", "VariableDef", "LinearConstraintDef",
    "ModelDef", "Assignment", "Evaluation", "constraint", "relax", "to_lp",
    "evaluate", "add_constraint", "add_constraints", "objective_zeroed",
]
