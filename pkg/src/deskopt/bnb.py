"""Branch-and-bound over dense LP relaxations, with lazy-constraint callbacks.

Children are solved as soon as they are created, so every queued node
carries a relaxation value and the global bound is always the smallest of
those values (in minimization terms). Integral relaxations are handed to the
optional callback, which may answer with rows the candidate violates; those
rows join the model for the rest of the search and the node is re-solved.

Log lines sent to ``log`` have the fixed form::

    nodes=<int> lb=<float|-> ub=<float|-> gap=<float|inf>

one per change of either bound (floats printed with ``%.9g``).
"""

from __future__ import annotations

import heapq
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .lp import INF, DenseLinearProgram, INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp
from .model import (
    MAXIMIZE,
    Assignment,
    LinearConstraintDef,
    ModelDef,
    evaluate,
)

BEST_BOUND, DEPTH_FIRST, BREADTH_FIRST = "best_bound", "depth_first", "breadth_first"
NODE_STRATEGIES = (BEST_BOUND, DEPTH_FIRST, BREADTH_FIRST)
MOST_FRACTIONAL, LOWEST_INDEX, RANDOM = "most_fractional", "lowest_index", "random"
BRANCH_RULES = (MOST_FRACTIONAL, LOWEST_INDEX, RANDOM)
LE_FIRST, GE_FIRST = "le_first", "ge_first"

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_GAP_LIMIT = "gap_limit"
STATUS_TIME_LIMIT = "time_limit"
STATUS_NODE_LIMIT = "node_limit"
STATUSES = (STATUS_OPTIMAL, STATUS_INFEASIBLE, STATUS_GAP_LIMIT,
            STATUS_TIME_LIMIT, STATUS_NODE_LIMIT)

DEFAULT_GAP = 1e-4
FATHOM_TOL = 1e-9
LAZY_VIOLATION_TOL = 1e-6

LazyCallback = Callable[[Assignment], Sequence[LinearConstraintDef]]


class SolverError(RuntimeError):
    """A relaxation could not be solved (e.g. it is unbounded)."""


class LazyConstraintError(RuntimeError):
    """The callback returned a row that does not cut off its candidate."""


@dataclass(frozen=True)
class SolverConfig:
    node_strategy: str = BEST_BOUND
    branch_rule: str = MOST_FRACTIONAL
    integrality_tol: float = 1e-6
    rel_gap_tol: float = DEFAULT_GAP
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    seed: int = 0
    child_order: str = LE_FIRST

    def __post_init__(self):
        if self.node_strategy not in NODE_STRATEGIES:
            raise ValueError(f"node_strategy must be one of {NODE_STRATEGIES}")
        if self.branch_rule not in BRANCH_RULES:
            raise ValueError(f"branch_rule must be one of {BRANCH_RULES}")
        if self.child_order not in (LE_FIRST, GE_FIRST):
            raise ValueError("child_order must be 'le_first' or 'ge_first'")
        if not self.integrality_tol > 0:
            raise ValueError("integrality_tol must be positive")
        # zero is allowed: enumeration and counting need an exact search
        if self.rel_gap_tol < 0:
            raise ValueError("rel_gap_tol must be nonnegative")


@dataclass
class NodeRecord:
    id: int
    parent: Optional[int] = None
    depth: int = 0
    # (variable index, "lower" | "upper", new bound), applied in order
    bound_changes: tuple[tuple[int, str, float], ...] = ()
    lp_value: Optional[float] = None
    state: str = "unexplored"
    primal: Optional[np.ndarray] = field(default=None, repr=False)
    rows_seen: int = field(default=0, repr=False)


@dataclass(frozen=True)
class Incumbent:
    assignment: Assignment
    value: float
    found_at_node: int


@dataclass
class SolveStats:
    nodes_explored: int = 0
    lb_history: list[tuple[int, float]] = field(default_factory=list)
    ub_history: list[tuple[int, float]] = field(default_factory=list)
    runtime: float = 0.0
    status: str = ""
    lazy_constraints_added: int = 0
    lazy_rows: list[LinearConstraintDef] = field(default_factory=list, repr=False)
    lp_iterations: int = 0

    @property
    def lower_bound(self) -> Optional[float]:
        return self.lb_history[-1][1] if self.lb_history else None

    @property
    def upper_bound(self) -> Optional[float]:
        return self.ub_history[-1][1] if self.ub_history else None


class SolveResult(NamedTuple):
    status: str
    incumbent: Optional[Incumbent]
    stats: SolveStats


def current_gap(ub: Optional[float], lb: Optional[float]) -> float:
    if ub is None or lb is None:
        return math.inf
    return abs(ub - lb) / max(1e-10, abs(ub))


def _fractionality(value: float) -> float:
    return abs(value - round(value))


def select_branch_var(primal: Sequence[float], model: ModelDef,
                      rule: str = MOST_FRACTIONAL, rng: Optional[random.Random] = None,
                      tol: float = 1e-6) -> Optional[int]:
    """Pick an integer variable with a fractional value, or None if there is none."""
    candidates = [i for i, v in enumerate(model.variables)
                  if v.is_integer and _fractionality(primal[i]) > tol]
    if not candidates:
        return None
    if rule == LOWEST_INDEX:
        return candidates[0]
    if rule == RANDOM:
        return (rng or random.Random(0)).choice(candidates)
    best, best_frac = candidates[0], _fractionality(primal[candidates[0]])
    for i in candidates[1:]:
        frac = _fractionality(primal[i])
        if frac > best_frac + 1e-12:
            best, best_frac = i, frac
    return best


def branch(node: NodeRecord, var: int, value: float, tol: float = 1e-6,
           next_id: Optional[int] = None) -> tuple[NodeRecord, NodeRecord]:
    """Split ``node`` into ``x[var] <= floor(value)`` and ``x[var] >= ceil(value)``."""
    if _fractionality(value) <= tol:
        raise ValueError(f"cannot branch on integral value {value} of variable {var}")
    first = node.id * 2 + 1 if next_id is None else next_id
    down = NodeRecord(first, node.id, node.depth + 1,
                      node.bound_changes + ((var, "upper", float(math.floor(value))),))
    up = NodeRecord(first + 1, node.id, node.depth + 1,
                    node.bound_changes + ((var, "lower", float(math.ceil(value))),))
    return down, up


class _Search:
    def __init__(self, model, config, callback, log):
        self.model = model
        self.config = config
        self.callback = callback
        self.log = log
        self.rng = random.Random(config.seed)
        self.sign = -1.0 if model.sense == MAXIMIZE else 1.0
        self.stats = SolveStats()
        self.rows: list[LinearConstraintDef] = list(model.constraints)
        self.integer = np.array([v.is_integer for v in model.variables])
        lower = np.array([v.lower for v in model.variables], dtype=float)
        upper = np.array([v.upper for v in model.variables], dtype=float)
        tol = config.integrality_tol
        finite_lo = self.integer & (lower > -INF)
        finite_up = self.integer & (upper < INF)
        lower[finite_lo] = np.ceil(lower[finite_lo] - tol)
        upper[finite_up] = np.floor(upper[finite_up] + tol)
        self.lower, self.upper = lower, upper
        self.objective = model.objective_vector()
        self._matrix = None
        self.incumbent: Optional[Incumbent] = None
        self.queue: list = []
        self.seq = 0
        self.next_id = 1
        self.start = time.perf_counter()
        self._last_logged = (None, None)
        self._lb = -math.inf

    # -- relaxation plumbing -------------------------------------------------
    def matrix(self):
        if self._matrix is None or self._matrix.shape[0] != len(self.rows):
            old = 0 if self._matrix is None else self._matrix.shape[0]
            extra = np.zeros((len(self.rows) - old, self.model.num_vars))
            for r, row in enumerate(self.rows[old:]):
                for i, c in row.terms:
                    extra[r, i] = c
            self._matrix = extra if self._matrix is None else np.vstack([self._matrix, extra])
        return self._matrix

    def relaxation(self, node):
        lower = self.lower.copy()
        upper = self.upper.copy()
        for var, kind, value in node.bound_changes:
            if kind == "upper":
                upper[var] = min(upper[var], value)
            else:
                lower[var] = max(lower[var], value)
        if np.any(lower > upper):
            return None
        return DenseLinearProgram(
            self.objective, self.matrix(), tuple(r.comparator for r in self.rows),
            [r.rhs for r in self.rows], lower, upper, self.model.sense)

    # -- bookkeeping ---------------------------------------------------------
    def internal(self, value):
        return self.sign * value

    def incumbent_key(self):
        return None if self.incumbent is None else self.internal(self.incumbent.value)

    def dominated(self, key):
        inc = self.incumbent_key()
        return inc is not None and key >= inc - FATHOM_TOL * max(1.0, abs(inc))

    def queue_bound(self):
        if not self.queue:
            return None
        if self.config.node_strategy == BEST_BOUND:
            return self.queue[0][1]
        return min(item[1] for item in self.queue)

    def global_bound(self):
        bound = self.queue_bound()
        inc = self.incumbent_key()
        if bound is None:
            bound = inc
        elif inc is not None:
            bound = min(bound, inc)
        if bound is None:
            return None
        self._lb = max(self._lb, bound)
        return self._lb

    def record(self, final=False):
        bound = self.global_bound()
        inc = self.incumbent_key()
        nodes = self.stats.nodes_explored
        if self.sign > 0:
            lb, ub = bound, inc
        else:
            lb = None if inc is None else -inc
            ub = None if bound is None else -bound
        if lb is not None and (not self.stats.lb_history or self.stats.lb_history[-1][1] != lb):
            self.stats.lb_history.append((nodes, lb))
        if ub is not None and (not self.stats.ub_history or self.stats.ub_history[-1][1] != ub):
            self.stats.ub_history.append((nodes, ub))
        if self.log is not None and (lb, ub) != self._last_logged:
            self._last_logged = (lb, ub)
            gap = current_gap(inc, bound)
            self.log(f"nodes={nodes} lb={_fmt(lb)} ub={_fmt(ub)} "
                     f"gap={'inf' if math.isinf(gap) else f'{gap:.9g}'}")

    def push(self, node):
        key = self.internal(node.lp_value)
        strategy = self.config.node_strategy
        if strategy == BEST_BOUND:
            order = (key, self.seq)
        elif strategy == DEPTH_FIRST:
            order = (-self.seq,)
        else:
            order = (self.seq,)
        heapq.heappush(self.queue, (order, key, self.seq, node))
        self.seq += 1

    def pop(self):
        return heapq.heappop(self.queue)[3]

    # -- node processing -----------------------------------------------------
    def evaluate(self, node) -> bool:
        """Solve ``node``'s relaxation; True if it must be queued for branching."""
        self.stats.nodes_explored += 1
        while True:
            lp = self.relaxation(node)
            node.rows_seen = len(self.rows)
            if lp is None:
                node.state = "infeasible"
                return False
            sol = solve_lp(lp)
            self.stats.lp_iterations += sol.iterations
            if sol.status == INFEASIBLE:
                node.state = "infeasible"
                return False
            if sol.status == UNBOUNDED:
                raise SolverError(f"relaxation of node {node.id} is unbounded")
            if sol.status != OPTIMAL:
                raise SolverError(f"relaxation of node {node.id} returned {sol.status}")
            node.lp_value = sol.objective_value
            node.primal = sol.primal
            if self.dominated(self.internal(node.lp_value)):
                node.state = "fathomed"
                return False
            var = select_branch_var(sol.primal, self.model, self.config.branch_rule,
                                    self.rng, self.config.integrality_tol)
            if var is not None:
                node.state = "unexplored"
                return True
            candidate = np.where(self.integer, np.round(sol.primal), sol.primal)
            candidate = Assignment(candidate + 0.0)
            if self.callback is not None and self.lazy(candidate):
                continue
            node.state = "integral"
            self.offer(candidate, node.id)
            return False

    def lazy(self, candidate) -> bool:
        cuts = list(self.callback(candidate) or ())
        if not cuts:
            return False
        n = self.model.num_vars
        for cut in cuts:
            if cut.max_index() >= n:
                raise LazyConstraintError(f"lazy constraint {cut.label!r} has an out-of-range index")
            if cut.violation(candidate.values) <= LAZY_VIOLATION_TOL:
                raise LazyConstraintError(
                    f"lazy constraint {cut.label!r} is not violated by its candidate "
                    f"(violation {cut.violation(candidate.values):.3g})")
        if self.incumbent is not None:
            for cut in cuts:
                if cut.violation(self.incumbent.assignment.values) > LAZY_VIOLATION_TOL:
                    raise LazyConstraintError(
                        f"lazy constraint {cut.label!r} cuts off the accepted incumbent")
        self.rows.extend(cuts)
        self.stats.lazy_rows.extend(cuts)
        self.stats.lazy_constraints_added += len(cuts)
        return True

    def offer(self, candidate, node_id):
        value = self.model.objective_value(candidate.values)
        inc = self.incumbent_key()
        if inc is None or self.internal(value) < inc - 1e-9:
            self.incumbent = Incumbent(candidate, value, node_id)

    def out_of_time(self):
        limit = self.config.time_limit
        return limit is not None and time.perf_counter() - self.start >= limit

    def out_of_nodes(self):
        limit = self.config.node_limit
        return limit is not None and self.stats.nodes_explored >= limit

    # -- main loop -----------------------------------------------------------
    def run(self) -> SolveResult:
        root = NodeRecord(0)
        if self.evaluate(root):
            self.push(root)
        self.record()
        status = None
        while self.queue:
            gap = current_gap(self.incumbent_key(), self.global_bound())
            if gap <= self.config.rel_gap_tol:
                status = STATUS_OPTIMAL if gap <= min(DEFAULT_GAP, self.config.rel_gap_tol) \
                    else STATUS_GAP_LIMIT
                break
            if self.out_of_time():
                status = STATUS_TIME_LIMIT
                break
            if self.out_of_nodes():
                status = STATUS_NODE_LIMIT
                break
            node = self.pop()
            if self.dominated(self.internal(node.lp_value)):
                node.state = "fathomed"
                continue
            if node.rows_seen < len(self.rows):
                # lazy rows arrived after this node was solved
                self.stats.nodes_explored -= 1
                if self.evaluate(node):
                    self.push(node)
                self.record()
                continue
            node.state = "explored"
            var = select_branch_var(node.primal, self.model, self.config.branch_rule,
                                    self.rng, self.config.integrality_tol)
            down, up = branch(node, var, float(node.primal[var]),
                              self.config.integrality_tol, self.next_id)
            self.next_id += 2
            children = [down, up] if self.config.child_order == LE_FIRST else [up, down]
            queued = [child for child in children if self.evaluate(child)]
            if self.config.node_strategy == DEPTH_FIRST:
                queued.reverse()
            for child in queued:
                self.push(child)
            self.record()
        if status is None:
            status = STATUS_OPTIMAL if self.incumbent is not None else STATUS_INFEASIBLE
        self.stats.status = status
        self.stats.runtime = time.perf_counter() - self.start
        self.record()
        return SolveResult(status, self.incumbent, self.stats)


def _fmt(value):
    return "-" if value is None else f"{value:.9g}"


def solve_milp(model: ModelDef, config: Optional[SolverConfig] = None,
               callback: Optional[LazyCallback] = None,
               log: Optional[Callable[[str], None]] = None) -> SolveResult:
    """Solve ``model`` to optimality (within ``config.rel_gap_tol``) by branch-and-bound.

    ``callback`` receives every integral candidate and returns the rows it
    violates (or nothing to accept it). Returned rows must be valid for every
    solution the caller wants to keep; they stay in the model for the rest of
    the search.
    """
    search = _Search(model, config or SolverConfig(), callback, log)
    result = search.run()
    if result.incumbent is not None:
        check = evaluate(model, result.incumbent.assignment, 1e-6)
        if not check.integral:
            raise SolverError("incumbent is not integral")
    return result


__all__ = [
    "SolverConfig", "NodeRecord", "Incumbent", "SolveStats", "SolveResult",
    "SolverError", "LazyConstraintError", "solve_milp", "select_branch_var",
    "branch", "current_gap", "STATUSES",
]
