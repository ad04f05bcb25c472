import io
import math
import random

import pytest

from deskopt.bnb import SolverConfig, solve_milp
from deskopt.model import Assignment, evaluate
from deskopt.tsp import (
    CityFileError,
    CityTable,
    DistanceMatrix,
    MalformedCandidateError,
    Tour,
    arc_index,
    arcs,
    build_full_sec_model,
    build_one_way_assignment,
    build_two_way_assignment,
    bundled_cities_path,
    enumerate_sec_subsets,
    extract_cycles,
    format_tour_arcs,
    haversine_like_distance,
    load_bundled,
    random_cities,
    read_cities,
    read_edge_list,
    sec_constraint,
    sec_count,
    separate_subtours,
    solve_tsp_full,
    solve_tsp_lazy,
    tour_from_assignment,
    tour_length,
    write_edge_list,
)
from oracles import planar_miles, tsp_brute_force

NY, LA, CHI, HOU, PHL = ("New York-NY", "Los Angeles-CA", "Chicago-IL", "Houston-TX",
                         "Philadelphia-PA")


def assignment_for(cycles, cities):
    n = len(cities)
    idx = arc_index(n)
    vals = [0.0] * (n * (n - 1))
    for cyc in cycles:
        for k, a in enumerate(cyc):
            b = cyc[(k + 1) % len(cyc)]
            vals[idx[cities.index(a), cities.index(b)]] = 1.0
    return Assignment(vals)


def test_distance_formula():
    assert haversine_like_distance((0, 0), (3, 4)) == pytest.approx(5 * 62.36)
    _, dm = load_bundled(3)
    assert dm[NY, LA] == pytest.approx(2789.8, abs=0.05)
    assert dm[NY, CHI] == pytest.approx(852.7, abs=0.05)
    assert dm[LA, CHI] == pytest.approx(1970.5, abs=0.05)
    assert dm.is_symmetric() and len(dm) == 6


def test_read_cities_file_order_and_coordinates():
    cities, dm = load_bundled(20)
    assert cities.names[:3] == (NY, LA, CHI)
    assert cities.coordinates[NY] == (-74.0059413, 40.7127837)
    for a, b in [(NY, PHL), (CHI, HOU)]:
        assert dm[a, b] == planar_miles(cities.coordinates[a], cities.coordinates[b])


def test_read_cities_errors(tmp_path):
    with pytest.raises(CityFileError, match="only 20 lines"):
        read_cities(bundled_cities_path(), 21)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,A,0,0\n2,B,zero,1\n")
    with pytest.raises(CityFileError, match=":2: unparsable"):
        read_cities(bad, 2)
    bad.write_text("1,A,0,0\n2,A,1,1\n")
    with pytest.raises(CityFileError, match=":2: duplicate"):
        read_cities(bad, 2)
    bad.write_text("1,A,0\n")
    with pytest.raises(CityFileError, match=":1: expected 4 fields"):
        read_cities(bad, 1)
    with pytest.raises(CityFileError):
        read_cities(bad, 0)


def test_tour_type():
    t = Tour(("a", "b", "c"))
    assert t.arcs() == [("a", "b"), ("b", "c"), ("c", "a")]
    assert t.same_cycle(Tour(("b", "c", "a")))
    assert t.same_cycle(Tour(("a", "c", "b")))
    assert not t.same_cycle(Tour(("a", "c", "b")), allow_reverse=False)
    with pytest.raises(ValueError):
        Tour(("a", "a", "b"))


def test_arc_layout_is_row_major():
    assert arcs(3) == ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
    cities, dm = load_bundled(4)
    m = build_two_way_assignment(cities, dm)
    assert m.num_vars == 12 and len(m.constraints) == 8
    assert m.variables[0].name == f"x[{NY},{LA}]"
    assert m.variables[0].objective_coeff == dm[NY, LA]


def test_sec_subset_enumeration():
    assert list(enumerate_sec_subsets(3)) == []
    assert len(list(enumerate_sec_subsets(4))) == 6
    assert len(list(enumerate_sec_subsets(5))) == 10
    assert len(list(enumerate_sec_subsets(6))) == 35
    assert sec_count(6) == 35


def test_sec_constraint_terms():
    cities, _ = load_bundled(5)
    row = sec_constraint([NY, LA, CHI], cities)
    assert row.comparator == ">=" and row.rhs == 1
    leaving = {arcs(5)[i] for i, _ in row.terms}
    assert leaving == {(i, j) for i in (0, 1, 2) for j in (3, 4)}
    with pytest.raises(ValueError):
        sec_constraint([NY], cities)
    with pytest.raises(ValueError):
        sec_constraint(cities.names, cities)


def test_full_sec_cap_message():
    cities, dm = random_cities(19, 0)
    with pytest.raises(ValueError, match="subtour rows"):
        build_full_sec_model(cities, dm)


def test_one_way_assignment_is_weaker():
    cities, dm = load_bundled(5)
    one = solve_milp(build_one_way_assignment(cities, dm)).incumbent.value
    two = solve_milp(build_two_way_assignment(cities, dm)).incumbent.value
    # one-way: each city just picks its nearest neighbour
    assert one == pytest.approx(sum(min(dm[a, b] for b in cities.names if b != a)
                                    for a in cities.names))
    assert one <= two


def test_two_way_five_cities_has_two_subtours():
    cities, dm = load_bundled(5)
    res = solve_milp(build_two_way_assignment(cities, dm))
    cycles = extract_cycles(res.incumbent.assignment, cities)
    assert sorted(map(frozenset, cycles), key=len) == [frozenset({NY, PHL}),
                                                       frozenset({CHI, HOU, LA})]


def test_extract_cycles_and_malformed():
    cities, _ = load_bundled(5)
    a = assignment_for([(NY, PHL), (LA, CHI, HOU)], cities)
    assert extract_cycles(a, cities) == [(NY, PHL), (LA, CHI, HOU)]
    assert len(separate_subtours(a, cities, "first_cycle")) == 1
    assert len(separate_subtours(a, cities, "all_cycles")) == 2
    (small,) = separate_subtours(a, cities, "smallest")
    assert small.violation(a.values) == 1
    with pytest.raises(MalformedCandidateError):
        extract_cycles(Assignment([0.0] * 20), cities)
    with pytest.raises(MalformedCandidateError):
        extract_cycles(Assignment([1.0] * 20), cities)
    with pytest.raises(MalformedCandidateError):
        tour_from_assignment(a, cities)
    tour = assignment_for([(NY, LA, CHI, HOU, PHL)], cities)
    assert separate_subtours(tour, cities) == []


def test_lazy_and_full_agree_on_five_cities():
    cities, dm = load_bundled(5)
    t1, v1, s1 = solve_tsp_lazy(cities, dm)
    t2, v2, _ = solve_tsp_full(cities, dm)
    assert v1 == pytest.approx(v2, rel=1e-9)
    assert s1.lazy_constraints_added >= 1
    assert t1.same_cycle(Tour((NY, PHL, HOU, LA, CHI)))
    assert tour_length(t1, dm) == pytest.approx(v1)


@pytest.mark.parametrize("mode", ["first_cycle", "all_cycles", "smallest", "largest"])
@pytest.mark.parametrize("seed", range(3))
def test_lazy_modes_match_brute_force(mode, seed):
    cities, dm = random_cities(7, seed)
    expected, _ = tsp_brute_force(cities.names, cities.coordinates)
    tour, value, _ = solve_tsp_lazy(cities, dm, mode=mode)
    assert value == pytest.approx(expected, rel=1e-9)
    assert tour.is_permutation_of(cities.names)


def test_edge_list_round_trip():
    cities, dm = load_bundled(5)
    tour = Tour((NY, PHL, HOU, LA, CHI))
    text = format_tour_arcs(tour)
    assert text.splitlines()[0] == f"{NY} -> {PHL}" and len(text.splitlines()) == 5
    buf = io.StringIO()
    write_edge_list(buf, tour, dm)
    buf.seek(0)
    rows = read_edge_list(buf)
    assert [r[:2] for r in rows] == tour.arcs()
    assert sum(r[2] for r in rows) == pytest.approx(tour_length(tour, dm), abs=1e-4)


def test_random_cities_reproducible():
    a, _ = random_cities(10, 4)
    b, _ = random_cities(10, random.Random(4))
    assert a == b


def test_one_way_three_cities():
    cities, dm = load_bundled(3)
    res = solve_milp(build_one_way_assignment(cities, dm))
    chosen = {arcs(3)[k] for k, v in enumerate(res.incumbent.assignment) if v > 0.5}
    names = cities.names
    assert {(names[i], names[j]) for i, j in chosen} == {(LA, CHI), (CHI, NY), (NY, CHI)}
    assert res.incumbent.value == pytest.approx(1970.5 + 852.7 + 852.7, abs=0.15)


def test_two_cities_one_way_equals_two_way():
    cities, dm = load_bundled(2)
    one = solve_milp(build_one_way_assignment(cities, dm)).incumbent.value
    two = solve_milp(build_two_way_assignment(cities, dm)).incumbent.value
    assert one == two == pytest.approx(2 * dm[NY, LA])


def test_full_sec_sizes_and_three_city_value():
    cities, dm = load_bundled(5)
    assert len(build_full_sec_model(cities, dm).constraints) == 20
    c3, d3 = load_bundled(3)
    tour, value, _ = solve_tsp_full(c3, d3)
    assert value == pytest.approx(5613.0, abs=0.2)
    assert tour_length(tour, d3) == pytest.approx(5613.0, abs=0.2)
    assert tour_length(tour.reversed(), d3) == pytest.approx(value)
    assert solve_tsp_lazy(c3, d3)[1] == pytest.approx(value)


def test_named_sec_and_fig4_violation():
    cities, _ = load_bundled(5)
    row = sec_constraint([CHI, HOU, LA], cities)
    out = {cities.names[j] for i, j in (arcs(5)[k] for k, _ in row.terms)}
    assert out == {NY, PHL} and len(row.terms) == 6
    a = assignment_for([(NY, PHL), (LA, CHI, HOU)], cities)
    pair = sec_constraint([NY, PHL], cities)
    assert pair.lhs(a.values) == 0


def test_separated_rows_are_valid_for_every_tour():
    import itertools
    n = 6
    cities, dm = random_cities(n, 8)
    names = cities.names
    tours = [assignment_for([(names[0],) + tuple(names[k] for k in p)], cities)
             for p in itertools.permutations(range(1, n))]
    rows = []
    for split in ([(0, 1), (2, 3, 4, 5)], [(0, 1, 2), (3, 4, 5)], [(0, 5), (1, 4), (2, 3)]):
        cand = assignment_for([tuple(names[k] for k in c) for c in split], cities)
        for row in separate_subtours(cand, cities, "all_cycles"):
            assert row.violation(cand.values) >= 1
            rows.append(row)
    for t in tours:
        assert all(r.violation(t.values) == 0 for r in rows)


@pytest.mark.parametrize("seed", range(4))
def test_two_way_bounds_tsp(seed):
    cities, dm = random_cities(6, seed)
    relax_value = solve_milp(build_two_way_assignment(cities, dm)).incumbent.value
    assert relax_value <= solve_tsp_lazy(cities, dm)[1] + 1e-9
