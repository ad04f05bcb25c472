"""Traveling salesperson instances, assignment/subtour formulations and separation.

Arc variables are laid out row-major over ordered city pairs: for city ``i``
in file order, every other city ``j`` in file order. All formulations built
here share that layout, so an assignment from one can be read by the others.
"""

from __future__ import annotations

import csv
import math
import os
import random
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import chain, combinations
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .bnb import SolverConfig, SolveStats, solve_milp
from .model import (
    BINARY,
    EQ,
    GE,
    MINIMIZE,
    Assignment,
    LinearConstraintDef,
    ModelDef,
    VariableDef,
)

MILES_PER_DEGREE = 62.36
FULL_SEC_MAX_CITIES = 18
SEPARATION_MODES = ("first_cycle", "all_cycles", "smallest", "largest")
BUNDLED_CITIES = "us-cities-top20.csv"


class CityFileError(ValueError):
    pass


class MalformedCandidateError(ValueError):
    """An assignment does not describe one outgoing and one incoming arc per city."""


@dataclass(frozen=True)
class CityTable:
    names: tuple[str, ...]
    coordinates: dict

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise ValueError("city names must be unique")
        missing = [c for c in self.names if c not in self.coordinates]
        if missing:
            raise ValueError(f"no coordinates for {missing[0]!r}")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def subset(self, n: int) -> "CityTable":
        names = self.names[:n]
        return CityTable(names, {c: self.coordinates[c] for c in names})


class DistanceMatrix:
    """Miles between every ordered pair of distinct cities."""

    def __init__(self, names: Sequence[str], matrix):
        self.names = tuple(names)
        self.matrix = np.array(matrix, dtype=float)
        self.matrix.setflags(write=False)
        self._pos = {c: i for i, c in enumerate(self.names)}

    @classmethod
    def from_cities(cls, cities: CityTable) -> "DistanceMatrix":
        n = len(cities)
        M = np.zeros((n, n))
        for i, a in enumerate(cities.names):
            for j, b in enumerate(cities.names):
                if i != j:
                    M[i, j] = haversine_like_distance(cities.coordinates[a], cities.coordinates[b])
        return cls(cities.names, M)

    def __getitem__(self, pair) -> float:
        a, b = pair
        if a == b:
            raise KeyError(pair)
        return float(self.matrix[self._pos[a], self._pos[b]])

    def __len__(self):
        n = len(self.names)
        return n * (n - 1)

    def __iter__(self):
        return iter(self.pairs())

    def pairs(self) -> list[tuple[str, str]]:
        return [(a, b) for a in self.names for b in self.names if a != b]

    def items(self):
        return [((a, b), self[a, b]) for a, b in self.pairs()]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.T))


@dataclass(frozen=True)
class Tour:
    cities: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "cities", tuple(self.cities))
        if len(self.cities) < 2:
            raise ValueError("a tour needs at least two cities")
        if len(set(self.cities)) != len(self.cities):
            raise ValueError("a tour visits each city exactly once")

    def __len__(self):
        return len(self.cities)

    def __iter__(self):
        return iter(self.cities)

    def arcs(self) -> list[tuple[str, str]]:
        c = self.cities
        return [(c[k], c[(k + 1) % len(c)]) for k in range(len(c))]

    def rotated_to(self, start: str) -> "Tour":
        k = self.cities.index(start)
        return Tour(self.cities[k:] + self.cities[:k])

    def reversed(self) -> "Tour":
        return Tour((self.cities[0],) + tuple(reversed(self.cities[1:])))

    def same_cycle(self, other: "Tour", allow_reverse: bool = True) -> bool:
        """Equality up to rotation (and reversal, unless disabled)."""
        if set(self.cities) != set(other.cities):
            return False
        mine = self.rotated_to(other.cities[0])
        return mine == other or (allow_reverse and mine.reversed() == other)

    def is_permutation_of(self, names: Iterable[str]) -> bool:
        names = list(names)
        return len(names) == len(self.cities) and set(names) == set(self.cities)


def haversine_like_distance(a, b) -> float:
    """Planar degree distance scaled to miles: ``62.36 * sqrt(d1^2 + d2^2)``."""
    (a1, a2), (b1, b2) = a, b
    return MILES_PER_DEGREE * math.sqrt((a1 - b1) * (a1 - b1) + (a2 - b2) * (a2 - b2))


def bundled_cities_path() -> str:
    return str(resources.files("deskopt").joinpath("data", BUNDLED_CITIES))


def read_cities(path: str | os.PathLike, n: int) -> tuple[CityTable, DistanceMatrix]:
    """Load the first ``n`` lines of an ``index,name,coord,coord`` file.

    Coordinates are stored in file column order; the distance formula is
    symmetric in the two, so no swap is applied.
    """
    if n < 1:
        raise CityFileError(f"need at least one city, got n={n}")
    names: list[str] = []
    coords: dict[str, tuple[float, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno in range(1, n + 1):
            try:
                row = next(reader)
            except StopIteration:
                raise CityFileError(
                    f"{path}: file has only {lineno - 1} lines, {n} requested") from None
            if len(row) != 4:
                raise CityFileError(
                    f"{path}:{lineno}: expected 4 fields 'index,name,coord,coord', got {row!r}")
            name = row[1]
            try:
                coord = (float(row[2]), float(row[3]))
            except ValueError:
                raise CityFileError(f"{path}:{lineno}: unparsable coordinates {row[2:]!r}") from None
            if name in coords:
                raise CityFileError(f"{path}:{lineno}: duplicate city name {name!r}")
            names.append(name)
            coords[name] = coord
    table = CityTable(tuple(names), coords)
    return table, DistanceMatrix.from_cities(table)


def load_bundled(n: int) -> tuple[CityTable, DistanceMatrix]:
    return read_cities(bundled_cities_path(), n)


# bounding box of the bundled city file (first, second coordinate)
US_BOX = (-122.4194155, -74.0059413, 29.4241219, 42.331427)


def random_cities(n: int, rng: random.Random | int, box=US_BOX) -> tuple[CityTable, DistanceMatrix]:
    """Seeded instance with coordinates uniform in ``box`` = (min1, max1, min2, max2)."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    lo1, hi1, lo2, hi2 = box
    names = tuple(f"City-{k + 1:03d}" for k in range(n))
    coords = {c: (rng.uniform(lo1, hi1), rng.uniform(lo2, hi2)) for c in names}
    table = CityTable(names, coords)
    return table, DistanceMatrix.from_cities(table)


@lru_cache(maxsize=64)
def arcs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(n) for j in range(n) if i != j)


@lru_cache(maxsize=64)
def arc_index(n: int) -> dict:
    return {arc: k for k, arc in enumerate(arcs(n))}


def _arc_variables(cities: CityTable, dm: DistanceMatrix) -> tuple[VariableDef, ...]:
    names = cities.names
    return tuple(VariableDef(f"x[{names[i]},{names[j]}]", BINARY, 0.0, 1.0,
                             float(dm.matrix[dm._pos[names[i]], dm._pos[names[j]]]))
                 for i, j in arcs(len(names)))


def _degree_rows(n: int, incoming: bool) -> list[LinearConstraintDef]:
    idx = arc_index(n)
    rows = []
    for a in range(n):
        if incoming:
            terms = tuple((idx[i, a], 1.0) for i in range(n) if i != a)
        else:
            terms = tuple((idx[a, j], 1.0) for j in range(n) if j != a)
        rows.append(LinearConstraintDef(terms, EQ, 1.0, f"{'in' if incoming else 'out'}[{a}]"))
    return rows


def build_one_way_assignment(cities: CityTable, dm: DistanceMatrix) -> ModelDef:
    if len(cities) < 2:
        raise ValueError("assignment models need at least two cities")
    return ModelDef(MINIMIZE, _arc_variables(cities, dm), tuple(_degree_rows(len(cities), False)))


def build_two_way_assignment(cities: CityTable, dm: DistanceMatrix) -> ModelDef:
    if len(cities) < 2:
        raise ValueError("assignment models need at least two cities")
    n = len(cities)
    rows = _degree_rows(n, False) + _degree_rows(n, True)
    return ModelDef(MINIMIZE, _arc_variables(cities, dm), tuple(rows))


def enumerate_sec_subsets(n: int) -> Iterator[tuple[int, ...]]:
    """Index subsets of sizes 2 .. n // 2, lexicographic within each size."""
    return chain.from_iterable(combinations(range(n), r) for r in range(2, n // 2 + 1))


def sec_count(n: int) -> int:
    return sum(math.comb(n, r) for r in range(2, n // 2 + 1))


def _subset_indices(subset, cities: CityTable) -> tuple[int, ...]:
    out = []
    for item in subset:
        out.append(cities.index(item) if isinstance(item, str) else int(item))
    return tuple(sorted(set(out)))


def sec_constraint(subset, cities: CityTable) -> LinearConstraintDef:
    """At least one arc leaves ``subset`` (names or indices)."""
    n = len(cities)
    S = _subset_indices(subset, cities)
    if not 2 <= len(S) < n:
        raise ValueError(f"subtour elimination needs 2 <= |S| < {n}, got |S| = {len(S)}")
    inside = set(S)
    idx = arc_index(n)
    terms = tuple((idx[i, j], 1.0) for i in S for j in range(n) if j not in inside)
    return LinearConstraintDef(terms, GE, 1.0, "sec{" + ",".join(map(str, S)) + "}")


def build_full_sec_model(cities: CityTable, dm: DistanceMatrix) -> ModelDef:
    n = len(cities)
    if n < 3:
        raise ValueError("the subtour model needs at least three cities")
    if n > FULL_SEC_MAX_CITIES:
        raise ValueError(
            f"n={n} would need {sec_count(n):,} subtour rows; the full model is capped at "
            f"n={FULL_SEC_MAX_CITIES}, use the lazy solver instead")
    base = build_two_way_assignment(cities, dm)
    secs = tuple(sec_constraint(S, cities) for S in enumerate_sec_subsets(n))
    return ModelDef(base.sense, base.variables, base.constraints + secs)


def _successors(values: Sequence[float], n: int, threshold: float) -> list[int]:
    if len(values) != n * (n - 1):
        raise MalformedCandidateError(
            f"assignment has {len(values)} values, {n} cities need {n * (n - 1)}")
    succ = [-1] * n
    for k, (i, j) in enumerate(arcs(n)):
        if values[k] > threshold:
            if succ[i] != -1:
                raise MalformedCandidateError(f"city {i} has more than one outgoing arc")
            succ[i] = j
    for i, j in enumerate(succ):
        if j == -1:
            raise MalformedCandidateError(f"city {i} has no outgoing arc above {threshold}")
    return succ


def extract_cycles(assignment, cities: CityTable, threshold: float = 0.99) -> list[tuple[str, ...]]:
    """Directed cycles of an integral assignment, starting from the first city."""
    n = len(cities)
    succ = _successors(tuple(assignment), n, threshold)
    if len(set(succ)) != n:
        raise MalformedCandidateError("some city has more than one incoming arc")
    seen = [False] * n
    cycles = []
    for start in range(n):
        if seen[start]:
            continue
        cycle = []
        k = start
        while not seen[k]:
            seen[k] = True
            cycle.append(cities.names[k])
            k = succ[k]
        cycles.append(tuple(cycle))
    return cycles


def separate_subtours(assignment, cities: CityTable, mode: str = "first_cycle",
                      threshold: float = 0.99) -> list[LinearConstraintDef]:
    if mode not in SEPARATION_MODES:
        raise ValueError(f"mode must be one of {SEPARATION_MODES}")
    cycles = extract_cycles(assignment, cities, threshold)
    if len(cycles) == 1:
        return []
    if mode == "first_cycle":
        chosen = cycles[:1]
    elif mode == "all_cycles":
        chosen = cycles
    elif mode == "smallest":
        chosen = [min(cycles, key=len)]
    else:
        chosen = [max(cycles, key=len)]
    return [sec_constraint(c, cities) for c in chosen]


def tour_from_assignment(assignment, cities: CityTable, threshold: float = 0.99) -> Tour:
    cycles = extract_cycles(assignment, cities, threshold)
    if len(cycles) != 1:
        raise MalformedCandidateError(f"assignment splits into {len(cycles)} subtours")
    return Tour(cycles[0])


def tour_length(tour: Tour | Sequence[str], dm: DistanceMatrix) -> float:
    seq = list(tour)
    total = 0.0
    for k in range(len(seq) - 1):
        total += dm[seq[k], seq[k + 1]]
    total += dm[seq[-1], seq[0]]
    return total


def solve_tsp_lazy(cities: CityTable, dm: DistanceMatrix, config: Optional[SolverConfig] = None,
                   mode: str = "first_cycle", log=None) -> tuple[Tour, float, SolveStats]:
    """Two-way assignment plus subtour rows added only when a candidate needs them."""
    if len(cities) < 3:
        raise ValueError("the TSP solvers need at least three cities")
    model = build_two_way_assignment(cities, dm)
    result = solve_milp(model, config, lambda a: separate_subtours(a, cities, mode), log)
    return _tour_result(result, cities)


def solve_tsp_full(cities: CityTable, dm: DistanceMatrix, config: Optional[SolverConfig] = None,
                   log=None) -> tuple[Tour, float, SolveStats]:
    result = solve_milp(build_full_sec_model(cities, dm), config, None, log)
    return _tour_result(result, cities)


def _tour_result(result, cities):
    if result.incumbent is None:
        return None, math.nan, result.stats
    tour = tour_from_assignment(result.incumbent.assignment, cities)
    return tour, result.incumbent.value, result.stats


def format_tour_arcs(tour: Tour) -> str:
    return "".join(f"{a} -> {b}\n" for a, b in tour.arcs())


def write_edge_list(fh, tour: Tour, dm: DistanceMatrix) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["origin", "destination", "miles"])
    for a, b in tour.arcs():
        writer.writerow([a, b, f"{dm[a, b]:.6f}"])


def read_edge_list(fh) -> list[tuple[str, str, float]]:
    reader = csv.reader(fh)
    header = next(reader)
    if header != ["origin", "destination", "miles"]:
        raise ValueError(f"unexpected edge-list header {header!r}")
    return [(a, b, float(m)) for a, b, m in reader]


__all__ = [
    "CityTable", "DistanceMatrix", "Tour", "CityFileError", "MalformedCandidateError",
    "haversine_like_distance", "read_cities", "load_bundled", "bundled_cities_path",
    "random_cities", "arcs", "arc_index", "build_one_way_assignment",
    "build_two_way_assignment", "enumerate_sec_subsets", "sec_count", "sec_constraint",
    "build_full_sec_model", "extract_cycles", "separate_subtours", "tour_from_assignment",
    "tour_length", "solve_tsp_lazy", "solve_tsp_full", "format_tour_arcs",
    "write_edge_list", "read_edge_list",
]
