"""Constructive and local-search heuristics for tours and set covering."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .tsp import CityTable, DistanceMatrix, Tour, tour_length

IMPROVEMENT_TOL = 1e-9
TWO_OPT_POLICIES = ("first", "best")


@dataclass(frozen=True)
class RclConfig:
    rcl_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if int(self.rcl_size) != self.rcl_size or self.rcl_size < 1:
            raise ValueError(f"rcl_size must be a positive integer, got {self.rcl_size}")


@dataclass(frozen=True)
class SetCoverInstance:
    """Items are ``0 .. num_items - 1``; each set is ``(items, cost)``.

    Plain iterables of items are accepted for ``sets`` and get unit cost.
    """

    num_items: int
    sets: tuple
    seed: Optional[int] = None

    def __post_init__(self):
        if self.num_items < 1:
            raise ValueError("a set-cover instance needs at least one item")
        normalized = []
        for entry in self.sets:
            if isinstance(entry, tuple) and len(entry) == 2 and not isinstance(entry[0], int):
                items, cost = entry
            else:
                items, cost = entry, 1.0
            items = frozenset(int(i) for i in items)
            bad = [i for i in items if not 0 <= i < self.num_items]
            if bad:
                raise ValueError(f"set {len(normalized)} has out-of-range item {min(bad)}")
            if cost < 0:
                raise ValueError(f"set {len(normalized)} has negative cost {cost}")
            normalized.append((items, float(cost)))
        object.__setattr__(self, "sets", tuple(normalized))
        covered = frozenset().union(*(s for s, _ in normalized)) if normalized else frozenset()
        missing = sorted(set(range(self.num_items)) - covered)
        if missing:
            raise ValueError(f"item {missing[0]} is not contained in any set")

    @property
    def num_sets(self) -> int:
        return len(self.sets)

    def cost(self, chosen: Iterable[int]) -> float:
        return sum(self.sets[k][1] for k in chosen)

    def covers(self, chosen: Iterable[int]) -> bool:
        got = set()
        for k in chosen:
            got |= self.sets[k][0]
        return len(got) == self.num_items


def _rng(cfg: RclConfig, rng) -> random.Random:
    if rng is None:
        return random.Random(cfg.seed)
    return rng


def _construct(cities: CityTable, dm: DistanceMatrix, start: str, pick) -> Tour:
    if start not in cities.names:
        raise ValueError(f"unknown start city {start!r}")
    if len(cities) < 2:
        raise ValueError("a tour needs at least two cities")
    pos = [dm.names.index(c) for c in cities.names]
    D = dm.matrix[np.ix_(pos, pos)]
    current = cities.index(start)
    left = [k for k in range(len(cities)) if k != current]
    order = [current]
    while left:
        # stable sort keeps file order among equal distances
        ranked = sorted(left, key=lambda c: D[current, c])
        current = pick(ranked)
        left.remove(current)
        order.append(current)
    return Tour(tuple(cities.names[k] for k in order))


def greedy_tour(cities: CityTable, dm: DistanceMatrix, start: str) -> Tour:
    """Nearest unvisited city at every step."""
    return _construct(cities, dm, start, lambda ranked: ranked[0])


def multi_start_greedy(cities: CityTable, dm: DistanceMatrix) -> tuple[Tour, float]:
    best, best_len = None, float("inf")
    for start in cities.names:
        t = greedy_tour(cities, dm, start)
        length = tour_length(t, dm)
        if length < best_len:
            best, best_len = t, length
    return best, best_len


def semi_greedy_tour(cities: CityTable, dm: DistanceMatrix, start: str,
                     cfg: RclConfig = RclConfig(), rng: Optional[random.Random] = None) -> Tour:
    """Uniform draw among the ``rcl_size`` nearest unvisited cities at every step."""
    rng = _rng(cfg, rng)
    k = cfg.rcl_size
    return _construct(cities, dm, start, lambda ranked: ranked[rng.randrange(min(k, len(ranked)))])


def _two_opt_deltas(p: np.ndarray, D: np.ndarray) -> np.ndarray:
    """delta[i, j] for reversing positions i+1..j; +inf where the move is undefined."""
    n = len(p)
    fwd = D[p[:-1], p[1:]]
    rev = D[p[1:], p[:-1]]
    F = np.concatenate(([0.0], np.cumsum(fwd)))
    R = np.concatenate(([0.0], np.cumsum(rev)))
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    jn = (j + 1) % n
    ip = np.minimum(i + 1, n - 1)
    a, b, c, d = p[i], p[ip], p[j], p[jn]
    delta = (D[a, c] + D[b, d] - D[a, b] - D[c, d]
             + (R[j] - R[ip]) - (F[j] - F[ip]))
    return np.where(j >= i + 2, delta, np.inf)


def two_opt(tour: Tour, dm: DistanceMatrix, policy: str = "first") -> Tour:
    """Arc-pair exchanges with path reversal until none shortens the tour.

    The reversed path is re-costed, so asymmetric matrices are handled.
    ``policy`` picks the first improving move in (i, j) scan order, or the
    best one; the scan restarts after every accepted move.
    """
    if policy not in TWO_OPT_POLICIES:
        raise ValueError(f"policy must be one of {TWO_OPT_POLICIES}")
    n = len(tour)
    if n < 4:
        return tour
    pos = {c: k for k, c in enumerate(dm.names)}
    p = np.array([pos[c] for c in tour.cities])
    D = dm.matrix
    while True:
        delta = _two_opt_deltas(p, D)
        improving = delta < -IMPROVEMENT_TOL
        if not improving.any():
            break
        if policy == "first":
            flat = int(np.argmax(improving))
        else:
            flat = int(np.argmin(delta))
        i, j = divmod(flat, n)
        p[i + 1:j + 1] = p[i + 1:j + 1][::-1].copy()
    return Tour(tuple(dm.names[k] for k in p))


def _eliminate_redundant(inst: SetCoverInstance, chosen: list[int]) -> list[int]:
    counts = np.zeros(inst.num_items, dtype=int)
    for k in chosen:
        for item in inst.sets[k][0]:
            counts[item] += 1
    keep = set(chosen)
    for k in sorted(chosen, key=lambda s: (-inst.sets[s][1], s)):
        items = list(inst.sets[k][0])
        if all(counts[i] > 1 for i in items):
            keep.discard(k)
            counts[items] -= 1
    return sorted(keep)


def _grasp_construct(inst: SetCoverInstance, cfg: RclConfig, rng: random.Random,
                     weighted: bool) -> list[int]:
    uncovered = set(range(inst.num_items))
    chosen: list[int] = []
    while uncovered:
        scored = []
        for k, (items, cost) in enumerate(inst.sets):
            if k in chosen:
                continue
            gain = len(items & uncovered)
            if gain == 0:
                continue
            score = gain / cost if weighted and cost > 0 else float(gain)
            if weighted and cost == 0:
                score = float("inf")
            scored.append((-score, k))
        scored.sort()
        rcl = scored[:cfg.rcl_size]
        k = rcl[rng.randrange(len(rcl))][1]
        chosen.append(k)
        uncovered -= inst.sets[k][0]
    return chosen


def grasp_set_cover(inst: SetCoverInstance, iterations: int, cfg: RclConfig = RclConfig(),
                    weighted: bool = False, rng: Optional[random.Random] = None):
    """Best cover over semi-greedy constructions followed by redundancy removal.

    Returns ``(chosen set indices, total cost, per-iteration costs)``.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    rng = _rng(cfg, rng)
    best, best_cost = None, float("inf")
    history = []
    for _ in range(iterations):
        cover = _eliminate_redundant(inst, _grasp_construct(inst, cfg, rng, weighted))
        cost = inst.cost(cover)
        history.append(cost)
        if cost < best_cost:
            best, best_cost = cover, cost
    return tuple(best), best_cost, history


__all__ = [
    "RclConfig", "SetCoverInstance", "greedy_tour", "multi_start_greedy",
    "semi_greedy_tour", "two_opt", "grasp_set_cover",
]
