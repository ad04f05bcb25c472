"""Command-line front end: ``deskopt solve|bench|count|enumerate``.

Exit codes: 0 optimal or success, 2 usage error, 3 infeasible, 4 time or
node limit reached.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from . import bnb, heuristics, problems, tsp
from .bnb import SolverConfig, solve_milp
from .model import ModelError

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 2, 3, 4
DEFAULT_TIME_LIMIT = 600.0
TIME_LIMIT_ENV = "DESKOPT_TIME_LIMIT"

PROBLEMS = ("diet", "knapsack", "facility", "setcover", "tsp")
TSP_METHODS = ("lazy", "full_sec", "greedy", "multi_start", "semi_greedy", "two_opt")
HEURISTIC_METHODS = ("greedy", "multi_start", "semi_greedy", "two_opt", "grasp")
VALID_METHODS = {
    "tsp": TSP_METHODS,
    "knapsack": ("bnb",),
    "facility": ("bnb",),
    "setcover": ("bnb", "grasp"),
    "diet": ("bnb",),
}
BENCH_HEADER = ["problem", "method", "size", "trial", "seed", "runtime_s", "objective",
                "nodes", "status"]
HEURISTIC_STATUS = "heuristic"
GRASP_ITERATIONS = 50
SET_COVER_DENSITY = 0.3


class UsageError(Exception):
    pass


def default_time_limit() -> float:
    raw = os.environ.get(TIME_LIMIT_ENV)
    if raw is None or raw == "":
        return DEFAULT_TIME_LIMIT
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"{TIME_LIMIT_ENV}={raw!r} is not a number") from None
    if value <= 0:
        raise UsageError(f"{TIME_LIMIT_ENV} must be positive")
    return value


def exit_code(status: str) -> int:
    if status in (bnb.STATUS_OPTIMAL, bnb.STATUS_GAP_LIMIT, HEURISTIC_STATUS):
        return EXIT_OK
    if status == bnb.STATUS_INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def trial_seed(seed: int, problem: str, size: int, trial: int) -> int:
    """Independent but reproducible per-trial seed."""
    digest = hashlib.blake2b(f"{seed}:{problem}:{size}:{trial}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big") >> 1


# ----------------------------------------------------------------- instances

def _cities(file: Optional[str], n: int, seed: Optional[int] = None):
    if file is None and seed is not None:
        return tsp.random_cities(n, seed)
    path = file or tsp.bundled_cities_path()
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    try:
        return tsp.read_cities(path, n)
    except tsp.CityFileError as exc:
        raise UsageError(str(exc)) from None


def _load_file_instance(path: str, expected_type):
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            inst = problems.load_instance(fh)
        except (ValueError, KeyError, IndexError) as exc:
            raise UsageError(f"{path}: {exc}") from None
    if not isinstance(inst, expected_type):
        raise UsageError(f"{path} holds a {type(inst).__name__}, not a {expected_type.__name__}")
    return inst


def make_instance(problem: str, n: Optional[int], seed: int, file: Optional[str] = None,
                  random_tsp: bool = False):
    """Instance for ``problem``; built-in data when neither ``n`` nor ``file`` is given."""
    if problem == "diet":
        return problems.FRUIT
    if problem == "tsp":
        return _cities(file, n or 5, seed if random_tsp else None)
    if problem == "knapsack":
        if file:
            return _load_file_instance(file, problems.KnapsackInstance)
        return problems.CHOCOLATE_KNAPSACK if n is None else problems.random_knapsack(n, seed)
    if problem == "facility":
        if file:
            return _load_file_instance(file, problems.FacilityInstance)
        stores = n or 4
        return problems.random_facility(max(2, stores // 2), stores, seed)
    if problem == "setcover":
        if file:
            return _load_file_instance(file, heuristics.SetCoverInstance)
        sets = n or 8
        return problems.random_set_cover(sets, sets, SET_COVER_DENSITY, seed)
    raise UsageError(f"unknown problem {problem!r}")


def build_model(problem: str, inst):
    if problem == "diet":
        return problems.diet_model(inst)
    if problem == "knapsack":
        return problems.build_knapsack_model(inst)
    if problem == "facility":
        return problems.build_facility_model(inst)
    if problem == "setcover":
        return problems.build_set_cover_model(inst)
    if problem == "tsp":
        return tsp.build_full_sec_model(*inst)
    raise UsageError(f"unknown problem {problem!r}")


# ------------------------------------------------------------------ running

@dataclass
class Outcome:
    status: str
    objective: Optional[float]
    nodes: int = 0
    runtime: float = 0.0
    build_time: float = 0.0
    solution: object = None          # Tour, assignment tuple or chosen set indices
    labels: tuple = ()


def run_method(problem: str, method: str, inst, config: SolverConfig, seed: int = 0,
               log: Optional[Callable[[str], None]] = None) -> Outcome:
    """Build, then solve with the clock running around the solve only."""
    if method not in VALID_METHODS[problem]:
        raise UsageError(f"method {method!r} does not apply to {problem!r}; "
                         f"valid: {', '.join(VALID_METHODS[problem])}")
    if problem == "tsp":
        return _run_tsp(method, inst, config, seed, log)
    if method == "grasp":
        t0 = time.perf_counter()
        chosen, cost, _ = heuristics.grasp_set_cover(
            inst, GRASP_ITERATIONS, heuristics.RclConfig(3, seed))
        return Outcome(HEURISTIC_STATUS, cost, 0, time.perf_counter() - t0, 0.0, chosen)
    b0 = time.perf_counter()
    model = build_model(problem, inst)
    t0 = time.perf_counter()
    result = solve_milp(model, config, None, log)
    elapsed = time.perf_counter() - t0
    inc = result.incumbent
    return Outcome(result.status, None if inc is None else inc.value, result.stats.nodes_explored,
                   elapsed, t0 - b0, None if inc is None else tuple(inc.assignment),
                   tuple(v.name for v in model.variables))


def _run_tsp(method: str, inst, config: SolverConfig, seed: int, log=None) -> Outcome:
    cities, dm = inst
    if method in ("lazy", "full_sec"):
        b0 = time.perf_counter()
        model = (tsp.build_two_way_assignment(cities, dm) if method == "lazy"
                 else tsp.build_full_sec_model(cities, dm))
        callback = ((lambda a: tsp.separate_subtours(a, cities)) if method == "lazy" else None)
        t0 = time.perf_counter()
        result = solve_milp(model, config, callback, log)
        elapsed = time.perf_counter() - t0
        tour = (None if result.incumbent is None
                else tsp.tour_from_assignment(result.incumbent.assignment, cities))
        value = None if result.incumbent is None else result.incumbent.value
        return Outcome(result.status, value, result.stats.nodes_explored, elapsed,
                       t0 - b0, tour)
    start = cities.names[0]
    t0 = time.perf_counter()
    if method == "greedy":
        tour = heuristics.greedy_tour(cities, dm, start)
    elif method == "multi_start":
        tour, _ = heuristics.multi_start_greedy(cities, dm)
    elif method == "semi_greedy":
        tour = heuristics.semi_greedy_tour(cities, dm, start, heuristics.RclConfig(3, seed))
    else:
        tour = heuristics.two_opt(heuristics.greedy_tour(cities, dm, start), dm)
    elapsed = time.perf_counter() - t0
    return Outcome(HEURISTIC_STATUS, tsp.tour_length(tour, dm), 0, elapsed, 0.0, tour)


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(node_strategy=args.node_strategy, branch_rule=args.branch_rule,
                            rel_gap_tol=args.gap, time_limit=args.time_limit,
                            seed=args.seed)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _fmt(x) -> str:
    return "" if x is None else f"{x:.9g}"


# ----------------------------------------------------------------- commands

def cmd_solve(args, out) -> int:
    if args.n is not None and args.n < 1:
        raise UsageError("--n must be a positive integer")
    method = args.method or VALID_METHODS[args.problem][0]
    config = _solver_config(args)
    inst = make_instance(args.problem, args.n, args.seed, args.file)
    log = (lambda line: print(line, file=sys.stderr)) if args.verbose else None
    try:
        outcome = run_method(args.problem, method, inst, config, args.seed, log)
    except (ModelError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    print(f"status: {outcome.status}", file=out)
    print(f"objective: {_fmt(outcome.objective)}", file=out)
    _print_solution(args.problem, inst, outcome, out)
    print(f"nodes: {outcome.nodes}", file=out)
    print(f"runtime_s: {outcome.runtime:.6f}", file=out)
    if args.out and outcome.solution is not None:
        _write_solution(args.out, args.problem, inst, outcome)
    return exit_code(outcome.status)


def _print_solution(problem, inst, outcome: Outcome, out) -> None:
    sol = outcome.solution
    if sol is None:
        return
    if isinstance(sol, tsp.Tour):
        print("tour:", file=out)
        out.write(tsp.format_tour_arcs(sol))
    elif outcome.status == HEURISTIC_STATUS:
        print("sets: " + " ".join(map(str, sol)), file=out)
    else:
        for name, value in zip(outcome.labels, sol):
            if abs(value) > 1e-9:
                print(f"{name} = {value:g}", file=out)


def _write_solution(path, problem, inst, outcome: Outcome) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        sol = outcome.solution
        if isinstance(sol, tsp.Tour):
            tsp.write_edge_list(fh, sol, inst[1])
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["var", "value"])
        if outcome.status == HEURISTIC_STATUS:
            chosen = set(sol)
            for k in range(inst.num_sets):
                writer.writerow([f"set{k}", 1 if k in chosen else 0])
        else:
            for name, value in zip(outcome.labels, sol):
                writer.writerow([name, f"{value:g}"])


@dataclass(frozen=True)
class BenchSpec:
    problem: str
    methods: tuple
    sizes: tuple
    trials_per_size: int = 30
    seed: int = 0
    time_limit: Optional[float] = None
    file: Optional[str] = None
    include_build: bool = False

    def __post_init__(self):
        if self.problem not in VALID_METHODS or self.problem == "diet":
            raise UsageError(f"bench supports tsp, knapsack, facility, setcover; "
                             f"got {self.problem!r}")
        if not self.sizes:
            raise UsageError("bench needs at least one size")
        if any(s < 1 for s in self.sizes):
            raise UsageError("sizes must be positive")
        if self.trials_per_size < 1:
            raise UsageError("trials must be at least 1")
        if not self.methods:
            raise UsageError("bench needs at least one method")
        bad = [m for m in self.methods if m not in VALID_METHODS[self.problem]]
        if bad:
            pairs = "; ".join(f"{p}: {', '.join(ms)}" for p, ms in VALID_METHODS.items()
                              if p != "diet")
            raise UsageError(f"method {bad[0]!r} does not apply to {self.problem!r}. "
                             f"Valid pairs: {pairs}")
        if "full_sec" in self.methods and max(self.sizes) > tsp.FULL_SEC_MAX_CITIES:
            raise UsageError(f"full_sec is capped at {tsp.FULL_SEC_MAX_CITIES} cities")


def bench_rows(spec: BenchSpec, workers: int = 1):
    """Rows in (method, size, trial) order, whatever order the solves finish in."""
    config = SolverConfig(time_limit=spec.time_limit)
    jobs = [(m, s, t) for m in spec.methods for s in spec.sizes
            for t in range(spec.trials_per_size)]

    def run(job):
        method, size, trial = job
        seed = trial_seed(spec.seed, spec.problem, size, trial)
        inst = make_instance(spec.problem, size, seed, spec.file, random_tsp=spec.file is None)
        o = run_method(spec.problem, method, inst, config, seed)
        row = [spec.problem, method, size, trial, seed, f"{o.runtime:.6f}",
               _fmt(o.objective), o.nodes, o.status]
        if spec.include_build:
            row.append(f"{o.build_time:.6f}")
        return row

    if workers <= 1:
        for job in jobs:
            yield run(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(run, jobs)


def cmd_bench(args, out) -> int:
    spec = BenchSpec(args.problem, tuple(args.methods.split(",")), tuple(args.sizes),
                     args.trials, args.seed, args.time_limit, args.file, args.include_build)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_HEADER + (["build_s"] if spec.include_build else []))
        for row in bench_rows(spec, args.workers):
            writer.writerow(row)
            fh.flush()
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _binary_target(args):
    if args.problem not in ("tsp", "knapsack", "facility", "setcover"):
        raise UsageError(f"{args.problem!r} has non-binary variables; "
                         "counting and enumeration need a binary model")
    if args.n is not None and args.n < 1:
        raise UsageError("--n must be a positive integer")
    n = args.n if args.n is not None else (4 if args.problem == "tsp" else None)
    inst = make_instance(args.problem, n, args.seed, args.file)
    try:
        return build_model(args.problem, inst)
    except (ModelError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_count(args, out) -> int:
    model = _binary_target(args)
    try:
        count = problems.count_solutions(model, SolverConfig(time_limit=args.time_limit))
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    print(count, file=out)
    return EXIT_OK


def cmd_enumerate(args, out) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    model = _binary_target(args)
    try:
        found = problems.enumerate_best(model, args.k, SolverConfig(time_limit=args.time_limit))
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    for inc in found:
        print(f"{inc.value:.9g}", file=out)
    return EXIT_OK if found else EXIT_INFEASIBLE


# ------------------------------------------------------------------- parser

def _sizes(text: str) -> list[int]:
    """``10,20,30`` or ``10:100:10`` (inclusive stop)."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step < 1:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem_default=None):
        p.add_argument("--problem", choices=PROBLEMS, required=problem_default is None,
                       default=problem_default)
        p.add_argument("--file", help="city CSV (tsp) or instance file (others)")
        p.add_argument("--n", type=int, help="instance size (cities, items, stores, sets)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--time-limit", type=float, default=None)

    p = sub.add_parser("solve", help="solve one instance")
    common(p)
    p.add_argument("--method", help="bnb, lazy, full_sec, greedy, multi_start, "
                                    "semi_greedy, two_opt or grasp")
    p.add_argument("--gap", type=float, default=bnb.DEFAULT_GAP)
    p.add_argument("--node-strategy", choices=bnb.NODE_STRATEGIES, default=bnb.BEST_BOUND)
    p.add_argument("--branch-rule", choices=bnb.BRANCH_RULES, default=bnb.MOST_FRACTIONAL)
    p.add_argument("--out", help="write the solution (edge list for tsp, var,value otherwise)")
    p.add_argument("-v", "--verbose", action="store_true", help="log bound changes to stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="seeded benchmark campaign, CSV output")
    p.add_argument("--problem", choices=("tsp", "knapsack", "facility", "setcover"),
                   required=True)
    p.add_argument("--methods", required=True, help="comma-separated method list")
    p.add_argument("--sizes", type=_sizes, required=True)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--file", help="city CSV; tsp trials then share the file instance")
    p.add_argument("--include-build", action="store_true",
                   help="add a build_s column with model construction time")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("count", help="count feasible solutions of a binary model")
    common(p, "tsp")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("enumerate", help="k best solutions of a binary model")
    common(p, "knapsack")
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_enumerate)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.time_limit is None:
            args.time_limit = default_time_limit()
        return args.func(args, out)
    except UsageError as exc:
        print(f"deskopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
