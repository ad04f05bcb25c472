"""Dense two-phase primal simplex for linear programs with bounded variables.

Every row is turned into an equality by a slack whose bounds encode the
comparator (``<=``: slack >= 0, ``>=``: slack <= 0, ``==``: slack fixed at 0).
Rows whose starting slack value violates those bounds get an artificial
column; phase 1 minimizes the sum of artificials, phase 2 the real objective
with the artificials frozen at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INF = 1e100
LE, GE, EQ = "<=", ">=", "=="
COMPARATORS = (LE, GE, EQ)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
COST_TOL = 1e-9
MAX_ITERATIONS = 100_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LOWER, _AT_UPPER, _AT_ZERO, _BASIC = 0, 1, 2, 3


class MalformedLPError(ValueError):
    """Raised when a linear program violates its structural invariants."""


def is_infinite(value: float) -> bool:
    return abs(value) >= INF


def _as_bound(value: float) -> float:
    if value >= INF:
        return math.inf
    if value <= -INF:
        return -math.inf
    return float(value)


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DenseLinearProgram:
    """``min|max c.x  s.t.  A x (<=|>=|==) b,  lower <= x <= upper``.

    Bounds at or beyond ``±1e100`` mean "no bound". A row whose rhs is a
    sentinel infinity is either vacuous (``>= -inf``, ``<= +inf``) or
    infeasible. The arrays are copied and made read-only at construction.
    """

    objective: np.ndarray
    matrix: np.ndarray
    comparators: tuple[str, ...]
    rhs: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    sense: str = "minimize"

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        if A.ndim != 2 or A.shape[1] != n:
            raise MalformedLPError(
                f"constraint matrix has shape {A.shape}, expected (m, {n})")
        m = A.shape[0]
        comps = tuple(self.comparators)
        b = np.asarray(self.rhs, dtype=float).ravel()
        lo = np.asarray(self.lower_bounds, dtype=float).ravel()
        up = np.asarray(self.upper_bounds, dtype=float).ravel()
        if len(comps) != m or b.size != m:
            raise MalformedLPError(
                f"{m} rows but {len(comps)} comparators and {b.size} rhs values")
        if lo.size != n or up.size != n:
            raise MalformedLPError(f"bound vectors must have length {n}")
        bad = [cmp for cmp in comps if cmp not in COMPARATORS]
        if bad:
            raise MalformedLPError(f"unknown comparator {bad[0]!r}")
        if self.sense not in ("minimize", "maximize"):
            raise MalformedLPError(f"unknown sense {self.sense!r}")
        for name, arr in (("objective", c), ("matrix", A)):
            if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) >= INF):
                raise MalformedLPError(f"non-finite coefficient in {name}")
        for name, arr in (("rhs", b), ("lower_bounds", lo), ("upper_bounds", up)):
            if np.any(np.isnan(arr)):
                raise MalformedLPError(f"NaN in {name}")
        lo = np.maximum(lo, -INF)
        up = np.minimum(up, INF)
        if np.any(lo > up):
            i = int(np.argmax(lo > up))
            raise MalformedLPError(
                f"variable {i} has lower bound {lo[i]} above upper bound {up[i]}")
        object.__setattr__(self, "objective", _frozen(c))
        object.__setattr__(self, "matrix", _frozen(A))
        object.__setattr__(self, "comparators", comps)
        object.__setattr__(self, "rhs", _frozen(np.clip(b, -INF, INF)))
        object.__setattr__(self, "lower_bounds", _frozen(lo))
        object.__setattr__(self, "upper_bounds", _frozen(up))

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def rows(self) -> list[tuple[np.ndarray, str, float]]:
        return [(self.matrix[i], self.comparators[i], float(self.rhs[i]))
                for i in range(self.num_rows)]

    @classmethod
    def from_rows(cls, objective, rows, lower_bounds=None, upper_bounds=None,
                  sense="minimize"):
        """Build from ``(coefficients, comparator, rhs)`` triples.

        Missing bounds default to ``x >= 0`` with no upper bound.
        """
        c = np.asarray(objective, dtype=float)
        n = c.size
        rows = list(rows)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n) \
            if rows else np.zeros((0, n))
        lo = np.zeros(n) if lower_bounds is None else lower_bounds
        up = np.full(n, INF) if upper_bounds is None else upper_bounds
        return cls(c, A, tuple(r[1] for r in rows), [r[2] for r in rows],
                   lo, up, sense)


@dataclass(frozen=True)
class LpSolution:
    status: str
    objective_value: float
    primal: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def check_feasible(lp: DenseLinearProgram, point: Sequence[float], tol: float = FEAS_TOL):
    """Return ``(feasible, worst_violation)`` of ``point`` against rows and bounds."""
    x = np.asarray(point, dtype=float).ravel()
    if x.size != lp.num_vars:
        raise MalformedLPError(
            f"point has {x.size} entries, program has {lp.num_vars} variables")
    worst = 0.0
    lo, up = lp.lower_bounds, lp.upper_bounds
    finite_lo = lo > -INF
    finite_up = up < INF
    if finite_lo.any():
        worst = max(worst, float(np.max(np.where(finite_lo, lo - x, 0.0))))
    if finite_up.any():
        worst = max(worst, float(np.max(np.where(finite_up, x - up, 0.0))))
    if lp.num_rows:
        lhs = lp.matrix @ x
        for value, cmp, rhs in zip(lhs, lp.comparators, lp.rhs):
            if cmp == LE:
                excess = value - rhs if rhs < INF else 0.0
            elif cmp == GE:
                excess = rhs - value if rhs > -INF else 0.0
            else:
                excess = abs(value - rhs)
            worst = max(worst, float(excess))
    return worst <= tol, worst


class _Tableau:
    """Working state of the bounded-variable simplex (columns: x, slacks, artificials)."""

    def __init__(self, A_full, b, lower, upper, basis, status, x):
        self.A_full = A_full
        self.b = b
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.status = status
        self.x = x
        # basis is diagonal (±1) at start, so B^-1 A is a row rescaling
        signs = A_full[np.arange(len(basis)), basis]
        self.T = A_full / signs[:, None]
        self.iterations = 0

    def run(self, cost, allowed):
        """Minimize ``cost . x`` over the current basis; returns OPTIMAL or UNBOUNDED."""
        m = self.T.shape[0]
        n_cols = self.T.shape[1]
        degenerate_limit = 10 * (m + n_cols)
        degenerate = 0
        bland = False
        lower, upper, x, status = self.lower, self.upper, self.x, self.status
        movable = allowed & (lower < upper)
        while True:
            if self.iterations >= MAX_ITERATIONS:
                raise RuntimeError("simplex iteration limit reached")
            basis = self.basis
            d = cost - cost[basis] @ self.T
            up_ok = (status == _AT_LOWER) | (status == _AT_ZERO)
            down_ok = (status == _AT_UPPER) | (status == _AT_ZERO)
            score = np.where(up_ok & (d < -COST_TOL), -d, 0.0)
            score = np.maximum(score, np.where(down_ok & (d > COST_TOL), d, 0.0))
            score[~movable] = 0.0
            if not np.any(score > 0.0):
                return OPTIMAL
            if bland:
                j = int(np.argmax(score > 0.0))
            else:
                j = int(np.argmax(score))
            direction = 1.0 if (up_ok[j] and d[j] < -COST_TOL) else -1.0

            alpha = self.T[:, j] * direction
            xb = x[basis]
            lb = lower[basis]
            ub = upper[basis]
            ratios = np.full(m, math.inf)
            dec = alpha > PIVOT_TOL
            inc = alpha < -PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xb[dec] - lb[dec]) / alpha[dec]
                ratios[inc] = (ub[inc] - xb[inc]) / -alpha[inc]
            ratios = np.where(np.isnan(ratios), math.inf, np.maximum(ratios, 0.0))
            t_flip = upper[j] - lower[j]
            t_row = float(ratios.min()) if m else math.inf
            if math.isinf(t_row) and math.isinf(t_flip):
                return UNBOUNDED

            self.iterations += 1
            if t_flip <= t_row:
                t = t_flip
                x[basis] = xb - alpha * t
                x[j] = upper[j] if direction > 0 else lower[j]
                status[j] = _AT_UPPER if direction > 0 else _AT_LOWER
            else:
                t = t_row
                ties = np.flatnonzero(ratios <= t_row + PIVOT_TOL)
                if bland:
                    r = int(ties[np.argmin(basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
                x[basis] = xb - alpha * t
                x[j] += direction * t
                leaving = basis[r]
                if alpha[r] > 0:
                    x[leaving] = lower[leaving]
                    status[leaving] = _AT_LOWER
                else:
                    x[leaving] = upper[leaving]
                    status[leaving] = _AT_UPPER
                if lower[leaving] == upper[leaving]:
                    status[leaving] = _AT_LOWER
                self._pivot(r, j)
                status[j] = _BASIC
            if t <= 1e-12:
                degenerate += 1
                if degenerate > degenerate_limit:
                    bland = True
            else:
                degenerate = 0

    def _pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j

    def refresh_basic_values(self):
        """Recompute basic values from the original data to shed pivot drift."""
        basis = self.basis
        nonbasic = np.ones(self.x.size, dtype=bool)
        nonbasic[basis] = False
        if basis.size == 0:
            return
        rhs = self.b - self.A_full[:, nonbasic] @ self.x[nonbasic]
        try:
            self.x[basis] = np.linalg.solve(self.A_full[:, basis], rhs)
        except np.linalg.LinAlgError:
            pass


def solve_lp(lp: DenseLinearProgram) -> LpSolution:
    """Solve ``lp``; the returned primal is a basic optimal solution when optimal."""
    n = lp.num_vars
    sign = -1.0 if lp.sense == "maximize" else 1.0
    c = sign * np.asarray(lp.objective, dtype=float)
    lower = np.array([_as_bound(v) for v in lp.lower_bounds])
    upper = np.array([_as_bound(v) for v in lp.upper_bounds])

    keep = []
    for i, (cmp, rhs) in enumerate(zip(lp.comparators, lp.rhs)):
        if rhs >= INF:
            if cmp == LE:
                continue
            return _failure(INFEASIBLE, n)
        if rhs <= -INF:
            if cmp == GE:
                continue
            return _failure(INFEASIBLE, n)
        keep.append(i)
    A = lp.matrix[keep]
    b = np.asarray(lp.rhs, dtype=float)[keep]
    comps = [lp.comparators[i] for i in keep]
    m = len(keep)

    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    status = np.where(np.isfinite(lower), _AT_LOWER,
                      np.where(np.isfinite(upper), _AT_UPPER, _AT_ZERO))
    if m == 0:
        return _solve_box(c, sign, lower, upper, x)

    s_lower = np.array([0.0 if cmp in (LE, EQ) else -math.inf for cmp in comps])
    s_upper = np.array([0.0 if cmp in (GE, EQ) else math.inf for cmp in comps])
    residual = b - A @ x

    art_rows = [i for i in range(m)
                if residual[i] < s_lower[i] - FEAS_TOL or residual[i] > s_upper[i] + FEAS_TOL]
    k = len(art_rows)
    A_full = np.zeros((m, n + m + k))
    A_full[:, :n] = A
    A_full[:, n:n + m] = np.eye(m)
    basis = np.arange(n, n + m)
    x_slack = np.clip(residual, s_lower, s_upper)
    slack_status = np.full(m, _BASIC)
    for col, i in enumerate(art_rows):
        # slack parks at its finite bound; the artificial absorbs the rest
        bound = s_lower[i] if residual[i] < s_lower[i] else s_upper[i]
        x_slack[i] = bound
        slack_status[i] = _AT_LOWER if bound == s_lower[i] else _AT_UPPER
        A_full[i, n + m + col] = 1.0 if residual[i] > bound else -1.0
        basis[i] = n + m + col
    x_art = np.abs(residual[art_rows] - x_slack[art_rows]) if k else np.zeros(0)

    full_lower = np.concatenate([lower, s_lower, np.zeros(k)])
    full_upper = np.concatenate([upper, s_upper, np.full(k, math.inf)])
    full_x = np.concatenate([x, x_slack, x_art])
    full_status = np.concatenate([status, slack_status, np.full(k, _BASIC)])

    tab = _Tableau(A_full, b, full_lower, full_upper, basis, full_status, full_x)
    allowed = np.ones(n + m + k, dtype=bool)

    if k:
        phase1 = np.zeros(n + m + k)
        phase1[n + m:] = 1.0
        tab.run(phase1, allowed)
        tab.refresh_basic_values()
        infeas = float(tab.x[n + m:].sum())
        scale = max(1.0, float(np.abs(b).max()))
        if infeas > FEAS_TOL * scale:
            return _failure(INFEASIBLE, n, tab.iterations)
        tab.upper[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)
        allowed[n + m:] = False

    cost = np.zeros(n + m + k)
    cost[:n] = c
    result = tab.run(cost, allowed)
    if result == UNBOUNDED:
        return _failure(UNBOUNDED, n, tab.iterations)
    tab.refresh_basic_values()
    primal = tab.x[:n].copy()
    primal = np.where(np.abs(primal) < 1e-12, 0.0, primal)
    value = float(np.dot(lp.objective, primal))
    return LpSolution(OPTIMAL, value, primal, tab.iterations)


def _solve_box(c, sign, lower, upper, x):
    x = x.copy()
    for j, cj in enumerate(c):
        if cj < -COST_TOL:
            if math.isinf(upper[j]):
                return _failure(UNBOUNDED, c.size)
            x[j] = upper[j]
        elif cj > COST_TOL:
            if math.isinf(lower[j]):
                return _failure(UNBOUNDED, c.size)
            x[j] = lower[j]
    return LpSolution(OPTIMAL, float(sign * np.dot(c, x)), x, 0)


def _failure(status, n, iterations=0):
    return LpSolution(status, math.nan, np.full(n, math.nan), iterations)
