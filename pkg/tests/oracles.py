"""Brute-force reference solvers used to check the engine.

Nothing here imports the simplex or branch-and-bound code; everything is
plain enumeration over numpy arrays or itertools.
"""

import itertools
import math

import numpy as np


def lp_vertex_optimum(c, A, comparators, b, lower, upper, sense="minimize", tol=1e-7):
    """Enumerate basic solutions of a bounded LP (all bounds finite).

    Returns (value, point) or (None, None) if infeasible.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(len(b), len(c))
    n = len(c)
    # every candidate active constraint as (row vector, rhs)
    planes = [(A[r], b[r]) for r in range(len(b))]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        planes.append((e, lower[i]))
        planes.append((e, upper[i]))
    best, arg = None, None
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[k][0] for k in combo])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([planes[k][1] for k in combo]))
        if np.any(x < np.asarray(lower) - tol) or np.any(x > np.asarray(upper) + tol):
            continue
        lhs = A @ x
        ok = True
        for r, cmp in enumerate(comparators):
            if cmp == "<=" and lhs[r] > b[r] + tol:
                ok = False
            elif cmp == ">=" and lhs[r] < b[r] - tol:
                ok = False
            elif cmp == "==" and abs(lhs[r] - b[r]) > tol:
                ok = False
        if not ok:
            continue
        val = float(c @ x)
        if best is None or (val < best if sense == "minimize" else val > best):
            best, arg = val, x
    return best, arg


def integer_grid(lower, upper):
    """All integer points of a box as an (N, n) array."""
    axes = [np.arange(int(lo), int(hi) + 1) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(float)


def ilp_brute_force(c, A, comparators, b, lower, upper, sense="minimize"):
    """Exact optimum of a small pure-integer program; (None, None) if infeasible."""
    X = integer_grid(lower, upper)
    ok = np.ones(len(X), dtype=bool)
    A = np.asarray(A, float).reshape(len(b), len(c))
    for r, cmp in enumerate(comparators):
        lhs = X @ A[r]
        if cmp == "<=":
            ok &= lhs <= b[r] + 1e-9
        elif cmp == ">=":
            ok &= lhs >= b[r] - 1e-9
        else:
            ok &= np.abs(lhs - b[r]) <= 1e-9
    if not ok.any():
        return None, None
    vals = X[ok] @ np.asarray(c, float)
    k = int(np.argmin(vals) if sense == "minimize" else np.argmax(vals))
    return float(vals[k]), X[ok][k]


def count_integer_points(A, comparators, b, lower, upper):
    X = integer_grid(lower, upper)
    ok = np.ones(len(X), dtype=bool)
    for r, cmp in enumerate(comparators):
        lhs = X @ np.asarray(A[r], float)
        if cmp == "<=":
            ok &= lhs <= b[r] + 1e-9
        elif cmp == ">=":
            ok &= lhs >= b[r] - 1e-9
        else:
            ok &= np.abs(lhs - b[r]) <= 1e-9
    return int(ok.sum())


def planar_miles(a, b):
    return 62.36 * math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)


def tsp_brute_force(names, coords):
    """Shortest closed tour by trying every permutation with the first city fixed."""
    n = len(names)
    D = np.array([[planar_miles(coords[a], coords[b]) for b in names] for a in names])
    best, best_tour = math.inf, None
    for perm in itertools.permutations(range(1, n)):
        order = (0,) + perm
        length = sum(D[order[k], order[(k + 1) % n]] for k in range(n))
        if length < best:
            best, best_tour = length, order
    return best, tuple(names[k] for k in best_tour)


def count_directed_tours(n):
    return math.factorial(n - 1)


def knapsack_brute_force(prices, values, budget):
    """All feasible 0/1 selections sorted by value, best first."""
    out = []
    for mask in itertools.product((0, 1), repeat=len(prices)):
        cost = sum(p for p, m in zip(prices, mask) if m)
        if cost <= budget + 1e-9:
            out.append((sum(v for v, m in zip(values, mask) if m), mask))
    out.sort(key=lambda t: -t[0])
    return out


def set_cover_brute_force(num_items, sets):
    """sets: list of (items, cost). Returns the minimum cover cost."""
    best = math.inf
    for mask in itertools.product((0, 1), repeat=len(sets)):
        got = set()
        for (items, _), m in zip(sets, mask):
            if m:
                got |= set(items)
        if len(got) == num_items:
            best = min(best, sum(cost for (_, cost), m in zip(sets, mask) if m))
    return best


def facility_brute_force(rents, capacities, demands, transport):
    """Try every store-to-facility map; rented set is the image of the map."""
    m, n = len(rents), len(demands)
    best = math.inf
    for assign in itertools.product(range(m), repeat=n):
        load = [0.0] * m
        for j, i in enumerate(assign):
            load[i] += demands[j]
        if any(load[i] > capacities[i] + 1e-9 for i in range(m)):
            continue
        used = set(assign)
        cost = sum(rents[i] for i in used) + sum(transport[i][j] for j, i in enumerate(assign))
        best = min(best, cost)
    return best


def random_ilp_data(seed, max_vars=8, max_points=60_000):
    """Seeded small pure-integer program with a finite box.

    The box is shrunk until it has at most ``max_points`` integer points so
    that brute force stays cheap.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, 5))
    upper = rng.integers(1, 6, size=n)
    while np.prod(upper + 1) > max_points:
        upper[int(np.argmax(upper))] -= 1
    c = rng.integers(-6, 7, size=n)
    A = rng.integers(-5, 6, size=(m, n))
    comps = [str(x) for x in rng.choice(["<=", ">=", "=="], size=m, p=[0.5, 0.35, 0.15])]
    # rhs near the value at a random box point keeps most instances feasible
    anchor = np.array([rng.integers(0, u + 1) for u in upper])
    b = A @ anchor + rng.integers(-3, 4, size=m)
    sense = "maximize" if rng.random() < 0.5 else "minimize"
    return c.astype(float), A.astype(float), comps, b.astype(float), np.zeros(n), \
        upper.astype(float), sense
