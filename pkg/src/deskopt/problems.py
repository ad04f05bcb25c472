"""Model builders, seeded instance generators and canonical-cut enumeration."""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from .bnb import Incumbent, SolverConfig, solve_milp
from .heuristics import SetCoverInstance
from .lp import INF
from .model import (
    BINARY,
    EQ,
    GE,
    INTEGER,
    LE,
    MAXIMIZE,
    MINIMIZE,
    Assignment,
    LinearConstraintDef,
    ModelDef,
    ModelError,
    VariableDef,
    add_constraint,
    objective_zeroed,
)


# ---------------------------------------------------------------- instances

@dataclass(frozen=True)
class DietInstance:
    prices: tuple[float, ...]
    nutrients: tuple[tuple[float, ...], ...]   # one row per nutrient
    needs: tuple[float, ...]
    foods: tuple[str, ...] = ()


APPLE_ORANGE = DietInstance((0.49, 0.50), ((214, 232),), (235,), ("apple", "orange"))

FRUIT = DietInstance(
    (0.49, 0.50, 0.51, 0.52),
    ((214, 232, 375, 155),      # potassium
     (12, 60.2, 5.75, 14.2),    # calcium
     (4.8, 2.8, 5.31, 5.52)),   # fiber
    (235, 65, 5.6),
    ("apple", "orange", "banana", "pear"),
)


@dataclass(frozen=True)
class KnapsackInstance:
    prices: tuple[float, ...]
    happiness: tuple[float, ...]
    budget: float
    per_item_cap: Optional[int] = 1     # None means unbounded
    names: tuple[str, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        object.__setattr__(self, "happiness", tuple(float(h) for h in self.happiness))
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.prices) != len(self.happiness):
            raise ValueError("prices and happiness must have equal lengths")
        if self.names and len(self.names) != len(self.prices):
            raise ValueError("names must match the number of items")
        if any(p <= 0 for p in self.prices):
            raise ValueError("prices must be positive")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.per_item_cap is not None and self.per_item_cap < 1:
            raise ValueError("per_item_cap must be at least 1 or None")

    @property
    def num_items(self) -> int:
        return len(self.prices)


CHOCOLATE_KNAPSACK = KnapsackInstance(
    (4.50, 4.00, 3.00, 3.00, 2.00), (10, 8, 7, 5, 1), 10.0, 1,
    ("Purity", "Lindt", "Dove", "Reese's", "Hershey's"))


@dataclass(frozen=True)
class FacilityInstance:
    rents: tuple[float, ...]
    capacities: tuple[float, ...]
    demands: tuple[float, ...]
    transport: np.ndarray                 # m x n, facility-major
    facility_coords: Optional[tuple] = None
    store_coords: Optional[tuple] = None
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("rents", "capacities", "demands"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        t = np.array(self.transport, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "transport", t)
        m, n = len(self.rents), len(self.demands)
        if len(self.capacities) != m:
            raise ValueError("rents and capacities must have equal lengths")
        if m < 1 or n < 1:
            raise ValueError("need at least one facility and one store")
        if t.shape != (m, n):
            raise ValueError(f"transport must be {m}x{n}, got {t.shape}")
        if min(self.rents) < 0 or min(self.capacities) < 0 or min(self.demands) < 0 or t.min() < 0:
            raise ValueError("facility data must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.rents)

    @property
    def n(self) -> int:
        return len(self.demands)


@dataclass(frozen=True)
class CutRecord:
    assignment: tuple[float, ...]
    constraint: LinearConstraintDef


# ----------------------------------------------------------------- builders

def build_diet_model(prices: Sequence[float], nutrients, needs: Sequence[float],
                     upper: float = INF, names: Sequence[str] = ()) -> ModelDef:
    """Cheapest integer basket meeting every nutrient need."""
    A = np.atleast_2d(np.asarray(nutrients, dtype=float))
    if A.shape != (len(needs), len(prices)):
        raise ModelError(
            f"nutrient matrix is {A.shape}, expected ({len(needs)}, {len(prices)})")
    names = list(names) or [f"x{i + 1}" for i in range(len(prices))]
    variables = tuple(VariableDef(names[i], INTEGER, 0.0, upper, float(p))
                      for i, p in enumerate(prices))
    rows = tuple(LinearConstraintDef(tuple(enumerate(A[r])), GE, float(needs[r]), f"need[{r}]")
                 for r in range(len(needs)))
    return ModelDef(MINIMIZE, variables, rows)


def diet_model(inst: DietInstance, upper: float = INF) -> ModelDef:
    return build_diet_model(inst.prices, inst.nutrients, inst.needs, upper, inst.foods)


def build_knapsack_model(k: KnapsackInstance) -> ModelDef:
    names = k.names or tuple(f"item{i + 1}" for i in range(k.num_items))
    variables = []
    for i, (p, h) in enumerate(zip(k.prices, k.happiness)):
        if k.per_item_cap == 1:
            variables.append(VariableDef(names[i], BINARY, 0.0, 1.0, h))
        else:
            cap = k.per_item_cap if k.per_item_cap is not None else math.floor(k.budget / p + 1e-9)
            variables.append(VariableDef(names[i], INTEGER, 0.0, float(cap), h))
    budget = LinearConstraintDef(tuple(enumerate(k.prices)), LE, k.budget, "budget")
    return ModelDef(MAXIMIZE, tuple(variables), (budget,))


def build_facility_model(f: FacilityInstance) -> ModelDef:
    """Variables ``x[i,j]`` (facility-major) followed by ``y[i]``."""
    m, n = f.m, f.n
    if sum(f.demands) > sum(f.capacities):
        warnings.warn(f"total demand {sum(f.demands):g} exceeds total capacity "
                      f"{sum(f.capacities):g}; the instance is likely infeasible",
                      RuntimeWarning, stacklevel=2)
    x = lambda i, j: i * n + j
    y = lambda i: m * n + i
    variables = [VariableDef(f"x[{i},{j}]", BINARY, 0.0, 1.0, float(f.transport[i, j]))
                 for i in range(m) for j in range(n)]
    variables += [VariableDef(f"y[{i}]", BINARY, 0.0, 1.0, f.rents[i]) for i in range(m)]
    rows = [LinearConstraintDef(tuple((x(i, j), 1.0) for i in range(m)), EQ, 1.0, f"assign[{j}]")
            for j in range(n)]
    for i in range(m):
        if f.capacities[i] < INF and math.isfinite(f.capacities[i]):
            terms = tuple((x(i, j), f.demands[j]) for j in range(n)) + ((y(i), -f.capacities[i]),)
            rows.append(LinearConstraintDef(terms, LE, 0.0, f"capacity[{i}]"))
    for i in range(m):
        for j in range(n):
            rows.append(LinearConstraintDef(((x(i, j), 1.0), (y(i), -1.0)), LE, 0.0,
                                            f"link[{i},{j}]"))
    return ModelDef(MINIMIZE, tuple(variables), tuple(rows))


def build_set_cover_model(s: SetCoverInstance) -> ModelDef:
    variables = tuple(VariableDef(f"set{k}", BINARY, 0.0, 1.0, cost)
                      for k, (_, cost) in enumerate(s.sets))
    rows = []
    for item in range(s.num_items):
        terms = tuple((k, 1.0) for k, (items, _) in enumerate(s.sets) if item in items)
        if not terms:
            raise ModelError(f"item {item} is not contained in any set")
        rows.append(LinearConstraintDef(terms, GE, 1.0, f"cover[{item}]"))
    return ModelDef(MINIMIZE, variables, tuple(rows))


# --------------------------------------------------------------- generators

def _as_rng(rng_or_seed) -> tuple[random.Random, Optional[int]]:
    if isinstance(rng_or_seed, random.Random):
        return rng_or_seed, None
    return random.Random(rng_or_seed), int(rng_or_seed)


def random_knapsack(n_items: Optional[int] = None, rng=0, budget: float = 10.0,
                    per_item_cap: Optional[int] = 1) -> KnapsackInstance:
    """Happiness uniform on 1..10, prices uniform on the cent grid 0.01..4.50."""
    rng, seed = _as_rng(rng)
    if n_items is None:
        n_items = rng.randint(5, 20)
    happiness = [rng.randint(1, 10) for _ in range(n_items)]
    prices = [rng.randint(1, 450) / 100 for _ in range(n_items)]
    return KnapsackInstance(tuple(prices), tuple(happiness), budget, per_item_cap, seed=seed)


def random_facility(m: int, n: int, rng=0, rent_range=(10.0, 100.0),
                    demand_range=(1.0, 10.0)) -> FacilityInstance:
    """Locations uniform on [0, 10]^2, Euclidean transport costs.

    Capacities are uniform on [D/m, 2D/m] for total demand D.
    """
    rng, seed = _as_rng(rng)
    fac = tuple((rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(m))
    sto = tuple((rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(n))
    rents = tuple(rng.uniform(*rent_range) for _ in range(m))
    demands = tuple(rng.uniform(*demand_range) for _ in range(n))
    total = sum(demands)
    capacities = tuple(rng.uniform(total / m, 2 * total / m) for _ in range(m))
    t = np.array([[math.dist(a, b) for b in sto] for a in fac])
    return FacilityInstance(rents, capacities, demands, t, fac, sto, seed)


def random_set_cover(num_sets: int, num_items: int, density: float, rng=0) -> SetCoverInstance:
    """Each (set, item) membership independently with probability ``density``.

    Items left uncovered are then added to one random set each.
    """
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if num_sets < 1:
        raise ValueError("need at least one set")
    rng, seed = _as_rng(rng)
    members = [set() for _ in range(num_sets)]
    for k in range(num_sets):
        for item in range(num_items):
            if rng.random() < density:
                members[k].add(item)
    covered = set().union(*members)
    for item in range(num_items):
        if item not in covered:
            members[rng.randrange(num_sets)].add(item)
    return SetCoverInstance(num_items, tuple((frozenset(s), 1.0) for s in members), seed=seed)


# ------------------------------------------------------------ cuts, k-best

def _is_binary(v: VariableDef) -> bool:
    return v.domain == BINARY or (v.domain == INTEGER and v.lower >= 0 and v.upper <= 1)


def _require_binary(model: ModelDef) -> None:
    bad = [v.name for v in model.variables if not _is_binary(v)]
    if bad:
        raise ModelError(f"canonical cuts need binary variables; {bad[0]!r} is not")


def canonical_cut(model: ModelDef, assignment, indices: Optional[Sequence[int]] = None
                  ) -> LinearConstraintDef:
    """Row excluding exactly the given 0/1 point over ``indices``.

    Written as ``sum_{x=1} x_i - sum_{x=0} x_i <= |ones| - 1``, which is the
    hypercube cut with the constant terms moved to the right-hand side.
    """
    values = tuple(assignment)
    if indices is None:
        indices = [i for i, v in enumerate(model.variables) if _is_binary(v)]
    terms, ones = [], 0
    for i in indices:
        v = model.variables[i]
        if not _is_binary(v):
            raise ModelError(f"variable {v.name!r} is not binary")
        bit = round(values[i])
        if abs(values[i] - bit) > 1e-6 or bit not in (0, 1):
            raise ModelError(f"variable {v.name!r} has non-binary value {values[i]}")
        if bit == 1:
            terms.append((i, 1.0))
            ones += 1
        else:
            terms.append((i, -1.0))
    return LinearConstraintDef(tuple(terms), LE, float(ones - 1), "canonical")


def cut_record(model: ModelDef, assignment) -> CutRecord:
    return CutRecord(tuple(assignment), canonical_cut(model, assignment))


def _exact_config(config: Optional[SolverConfig]) -> SolverConfig:
    return replace(config or SolverConfig(), rel_gap_tol=0.0)


def enumerate_best(model: ModelDef, k: int, config: Optional[SolverConfig] = None,
                   return_cuts: bool = False):
    """Up to ``k`` best solutions, each later one cut off before the next solve."""
    if k < 1:
        raise ValueError("k must be at least 1")
    _require_binary(model)
    config = _exact_config(config)
    found: list[Incumbent] = []
    cuts: list[CutRecord] = []
    current = model
    while len(found) < k:
        result = solve_milp(current, config)
        if result.incumbent is None or result.status != "optimal":
            break
        found.append(result.incumbent)
        rec = cut_record(model, result.incumbent.assignment)
        cuts.append(rec)
        current = add_constraint(current, rec.constraint)
    return (found, cuts) if return_cuts else found


def count_solutions(model: ModelDef, config: Optional[SolverConfig] = None,
                    limit: Optional[int] = None) -> int:
    """Number of feasible points, by solve, cut, repeat until infeasible."""
    _require_binary(model)
    config = _exact_config(config)
    current = objective_zeroed(model)
    count = 0
    while limit is None or count < limit:
        result = solve_milp(current, config)
        if result.incumbent is None:
            if result.status != "infeasible":
                raise RuntimeError(f"counting stopped early with status {result.status!r}")
            break
        count += 1
        current = add_constraint(current, canonical_cut(model, result.incumbent.assignment))
    return count


# ------------------------------------------------------------ serialization
#
# Text format: "key: value" header lines, then "[block]" sections holding
# comma-separated rows whose first line is a column header.

def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) and abs(x) < INF else "inf"


def dump_instance(inst, fh: TextIO) -> None:
    def header(kind, **kv):
        fh.write(f"type: {kind}\n")
        fh.write(f"seed: {'' if inst.seed is None else inst.seed}\n")
        for key, val in kv.items():
            fh.write(f"{key}: {val}\n")

    if isinstance(inst, KnapsackInstance):
        header("knapsack", budget=_fmt(inst.budget),
               per_item_cap="" if inst.per_item_cap is None else inst.per_item_cap)
        fh.write("[items]\nname,price,happiness\n")
        names = inst.names or [""] * inst.num_items
        for nm, p, h in zip(names, inst.prices, inst.happiness):
            fh.write(f"{nm},{_fmt(p)},{_fmt(h)}\n")
    elif isinstance(inst, FacilityInstance):
        header("facility", m=inst.m, n=inst.n)
        fh.write("[facilities]\nrent,capacity,x,y\n")
        for i in range(inst.m):
            cx, cy = inst.facility_coords[i] if inst.facility_coords else ("", "")
            fh.write(f"{_fmt(inst.rents[i])},{_fmt(inst.capacities[i])},{cx},{cy}\n")
        fh.write("[stores]\ndemand,x,y\n")
        for j in range(inst.n):
            cx, cy = inst.store_coords[j] if inst.store_coords else ("", "")
            fh.write(f"{_fmt(inst.demands[j])},{cx},{cy}\n")
        fh.write("[transport]\n" + ",".join(f"s{j}" for j in range(inst.n)) + "\n")
        for row in inst.transport:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    elif isinstance(inst, SetCoverInstance):
        header("setcover", num_items=inst.num_items)
        fh.write("[sets]\ncost,items\n")
        for items, cost in inst.sets:
            fh.write(f"{_fmt(cost)},{' '.join(map(str, sorted(items)))}\n")
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")


def _parse_blocks(fh: TextIO):
    meta, blocks, current = {}, {}, None
    for lineno, raw in enumerate(fh, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            blocks[current] = None
            continue
        if current is None:
            key, sep, val = line.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'key: value', got {line!r}")
            meta[key.strip()] = val.strip()
        elif blocks[current] is None:
            blocks[current] = []      # column header
        else:
            blocks[current].append(line.split(","))
    return meta, {k: v or [] for k, v in blocks.items()}


def load_instance(fh: TextIO):
    meta, blocks = _parse_blocks(fh)
    seed = int(meta["seed"]) if meta.get("seed") else None
    kind = meta.get("type")
    if kind == "knapsack":
        rows = blocks["items"]
        cap = meta.get("per_item_cap")
        names = tuple(r[0] for r in rows)
        return KnapsackInstance(tuple(float(r[1]) for r in rows), tuple(float(r[2]) for r in rows),
                                float(meta["budget"]), int(cap) if cap else None,
                                names if any(names) else (), seed)
    if kind == "facility":
        fac, sto = blocks["facilities"], blocks["stores"]
        coords = lambda rows, a: (tuple((float(r[a]), float(r[a + 1])) for r in rows)
                                  if rows and rows[0][a] else None)
        t = np.array([[float(v) for v in r] for r in blocks["transport"]])
        return FacilityInstance(tuple(float(r[0]) for r in fac), tuple(float(r[1]) for r in fac),
                                tuple(float(r[0]) for r in sto), t,
                                coords(fac, 2), coords(sto, 1), seed)
    if kind == "setcover":
        sets = tuple((frozenset(int(i) for i in r[1].split()), float(r[0]))
                     for r in blocks["sets"])
        return SetCoverInstance(int(meta["num_items"]), sets, seed=seed)
    raise ValueError(f"unknown instance type {kind!r}")


__all__ = [
    "DietInstance", "APPLE_ORANGE", "FRUIT", "KnapsackInstance", "CHOCOLATE_KNAPSACK",
    "FacilityInstance", "CutRecord", "build_diet_model", "diet_model",
    "build_knapsack_model", "build_facility_model", "build_set_cover_model",
    "random_knapsack", "random_facility", "random_set_cover", "canonical_cut",
    "cut_record", "enumerate_best", "count_solutions", "dump_instance", "load_instance",
]
