import math
import re

import numpy as np
import pytest

from deskopt.bnb import (
    BRANCH_RULES,
    NODE_STRATEGIES,
    LazyConstraintError,
    NodeRecord,
    SolverConfig,
    branch,
    current_gap,
    select_branch_var,
    solve_milp,
)
from deskopt.lp import INF
from deskopt.model import (
    BINARY,
    CONTINUOUS,
    INTEGER,
    MAXIMIZE,
    MINIMIZE,
    ModelDef,
    VariableDef,
    constraint,
)
from deskopt.problems import FRUIT, CHOCOLATE_KNAPSACK, build_knapsack_model, diet_model
from oracles import ilp_brute_force, random_ilp_data


def ilp_model(c, A, comps, b, lower, upper, sense):
    vs = tuple(VariableDef(f"x{i}", INTEGER, lower[i], upper[i], c[i]) for i in range(len(c)))
    rows = tuple(constraint(list(enumerate(A[r])), comps[r], b[r]) for r in range(len(b)))
    return ModelDef(sense, vs, rows)


def test_config_validation():
    for bad in (dict(node_strategy="dfs"), dict(branch_rule="x"), dict(child_order="up"),
                dict(rel_gap_tol=-1), dict(integrality_tol=0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    assert SolverConfig(rel_gap_tol=0).rel_gap_tol == 0


def test_gap_definition():
    assert current_gap(None, 1.0) == math.inf
    assert current_gap(1.0, 0.99) == pytest.approx(0.01)
    assert current_gap(0.0, 0.0) == 0.0


def test_select_branch_var_rules():
    m = ModelDef(MINIMIZE, tuple(VariableDef(f"x{i}", INTEGER) for i in range(3))
                 + (VariableDef("y", CONTINUOUS),))
    assert select_branch_var([0.2, 0.5, 0.5, 0.5], m) == 1     # tie -> lowest index
    assert select_branch_var([0.2, 0.6, 0.0, 0.5], m, "lowest_index") == 0
    assert select_branch_var([1.0, 2.0, 3.0, 0.5], m) is None  # continuous ignored
    import random
    assert select_branch_var([0.2, 0.6, 0.0, 0.5], m, "random", random.Random(1)) in (0, 1)


def test_branch_children():
    down, up = branch(NodeRecord(0), 3, 0.53)
    assert down.bound_changes == ((3, "upper", 0.0),)
    assert up.bound_changes == ((3, "lower", 1.0),)
    assert down.parent == up.parent == 0 and down.depth == 1
    with pytest.raises(ValueError):
        branch(NodeRecord(0), 3, 2.0)


def test_fruit_trace():
    res = solve_milp(diet_model(FRUIT))
    assert res.status == "optimal"
    assert res.incumbent.value == pytest.approx(0.99)
    assert tuple(res.incumbent.assignment) == (1, 1, 0, 0)
    lbs = [v for _, v in res.stats.lb_history]
    assert lbs == sorted(lbs)
    ubs = [v for _, v in res.stats.ub_history]
    assert ubs == pytest.approx([1.00, 0.99])


@pytest.mark.parametrize("strategy", NODE_STRATEGIES)
@pytest.mark.parametrize("rule", BRANCH_RULES)
def test_strategies_agree(strategy, rule):
    res = solve_milp(diet_model(FRUIT), SolverConfig(node_strategy=strategy, branch_rule=rule))
    assert res.incumbent.value == pytest.approx(0.99)


def test_maximization_history_sense():
    res = solve_milp(build_knapsack_model(CHOCOLATE_KNAPSACK))
    assert res.incumbent.value == 20
    # user sense: lb is the incumbent, ub the relaxation bound
    assert res.stats.ub_history[0][1] == pytest.approx(22.0)
    assert res.stats.lower_bound == res.stats.upper_bound == 20


def test_log_lines_format():
    lines = []
    solve_milp(diet_model(FRUIT), log=lines.append)
    pat = re.compile(r"^nodes=\d+ lb=(-|[-0-9.e+]+) ub=(-|[-0-9.e+]+) gap=([-0-9.e+]+|inf)$")
    assert lines and all(pat.match(l) for l in lines)
    assert lines[0].endswith("gap=inf")
    assert lines[-1].startswith("nodes=") and "ub=0.99" in lines[-1]


def test_infeasible_and_continuous_only():
    vs = (VariableDef("x", INTEGER, 0, 10, 1.0),)
    m = ModelDef(MINIMIZE, vs, (constraint({0: 2}, "==", 3),))
    res = solve_milp(m)
    assert res.status == "infeasible" and res.incumbent is None
    m = ModelDef(MINIMIZE, (VariableDef("y", CONTINUOUS, 0, INF, 1.0),),
                 (constraint({0: 1}, ">=", 2.5),))
    res = solve_milp(m)
    assert res.incumbent.value == pytest.approx(2.5) and res.stats.nodes_explored == 1


def test_node_limit_and_time_limit():
    res = solve_milp(diet_model(FRUIT), SolverConfig(node_limit=1))
    assert res.status == "node_limit"
    res = solve_milp(diet_model(FRUIT), SolverConfig(time_limit=1e-9))
    assert res.status == "time_limit"


def test_gap_limit_status():
    res = solve_milp(diet_model(FRUIT), SolverConfig(rel_gap_tol=0.5))
    assert res.status == "gap_limit"
    assert res.incumbent.value == pytest.approx(1.0)


def test_lazy_rows_are_applied_globally():
    # max x + y over binaries; lazy row x + y <= 1
    vs = (VariableDef("x", BINARY, 0, 1, 1.0), VariableDef("y", BINARY, 0, 1, 1.0))
    m = ModelDef(MAXIMIZE, vs)
    row = constraint({0: 1, 1: 1}, "<=", 1, "pair")

    def cb(a):
        return [row] if a[0] + a[1] > 1.5 else []

    res = solve_milp(m, callback=cb)
    assert res.incumbent.value == 1
    assert res.stats.lazy_constraints_added == 1
    assert res.stats.lazy_rows == [row]


def test_lazy_row_must_cut_candidate():
    vs = (VariableDef("x", BINARY, 0, 1, 1.0),)
    m = ModelDef(MAXIMIZE, vs)
    with pytest.raises(LazyConstraintError, match="not violated"):
        solve_milp(m, callback=lambda a: [constraint({0: 1}, "<=", 5)])
    with pytest.raises(LazyConstraintError, match="out-of-range"):
        solve_milp(m, callback=lambda a: [constraint({4: 1}, "<=", 0)])


@pytest.mark.parametrize("seed", range(40))
def test_random_ilps_match_brute_force(seed):
    data = random_ilp_data(seed)
    expected, _ = ilp_brute_force(*data)
    res = solve_milp(ilp_model(*data))
    if expected is None:
        assert res.status == "infeasible"
    else:
        assert res.status == "optimal"
        assert res.incumbent.value == expected


def test_fruit_root_branches_on_last_variable():
    from deskopt.lp import solve_lp
    from deskopt.model import relax, to_lp
    m = diet_model(FRUIT)
    root = solve_lp(to_lp(relax(m))).primal
    assert select_branch_var(root, m) == 3
    down, up = branch(NodeRecord(0), 3, root[3])
    assert down.bound_changes[-1] == (3, "upper", 0.0)
    assert up.bound_changes[-1] == (3, "lower", 1.0)
    assert branch(NodeRecord(0), 0, 2.4)[0].bound_changes == ((0, "upper", 2.0),)


def test_apple_orange_and_contradiction():
    from deskopt.problems import APPLE_ORANGE
    res = solve_milp(diet_model(APPLE_ORANGE))
    assert res.incumbent.value == pytest.approx(0.98)
    vs = (VariableDef("x", INTEGER, 0, 5, 1.0),)
    m = ModelDef(MINIMIZE, vs, (constraint({0: 1}, ">=", 1), constraint({0: 1}, "<=", 0)))
    assert solve_milp(m).status == "infeasible"


def test_final_bounds_are_consistent():
    for seed in range(15):
        data = random_ilp_data(500 + seed)
        res = solve_milp(ilp_model(*data))
        lb, ub = res.stats.lower_bound, res.stats.upper_bound
        if lb is not None and ub is not None:
            assert lb <= ub + 1e-9 * max(1, abs(ub))
        lbs = [v for _, v in res.stats.lb_history]
        ubs = [v for _, v in res.stats.ub_history]
        assert lbs == sorted(lbs) and ubs == sorted(ubs, reverse=True)
