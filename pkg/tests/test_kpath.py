from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings, strategies as st

from dynrepset.core.pseudorandom import FamilyCache
from dynrepset.core.semiring import INFINITY, BooleanSemiring, CappedMinPlus
from dynrepset.errors import ParseError, ResourceError, UsageError
from dynrepset.workers.circuit import format_circuit, monomial_sum, parse_circuit_text
from dynrepset.workers.kpath import (
    MAX_WEIGHT,
    brute_force_kpath,
    format_graph,
    kpath_as_circuit,
    parse_graph,
    parse_graph_text,
    random_digraph,
    solve_kpath,
    solve_kpath_decision,
)
from dynrepset.workers.models import WeightedDigraph

from .conftest import PATH_GRAPH, TRIANGLE
from .strategies import digraphs


def test_parse_small_graph():
    g = parse_graph_text("p kpath 2 1 2\ne 1 2 5\n")
    assert (g.n, g.edges, g.k) == (2, [(1, 2, 5)], 2)


def test_parse_graph_without_edges():
    g = parse_graph_text("p kpath 4 0 2\n")
    assert g.m == 0 and g.max_weight == 0


@pytest.mark.parametrize("text,line", [
    ("p kpath 2 1 2\ne 0 1 1\n", 2),
    ("p kpath 2 1 2\ne 1 2 -3\n", 2),
    ("e 1 2 3\n", 1),
    ("p kpath 2 1 2\ne 1 2\n", 2),
    ("p kpath 2 1 2\ne 1 2 x\n", 2),
    ("p kpath 2 1 2\nq\n", 2),
    ("p kpath 2 1 2\np kpath 2 1 2\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_graph_text(text)
    assert info.value.line == line


def test_parse_graph_needs_a_header():
    with pytest.raises(ParseError):
        parse_graph_text("# nothing\n")


def test_parse_graph_reads_files(path_graph_file, tmp_path):
    g = parse_graph(path_graph_file)
    assert parse_graph_text(format_graph(g)).edges == g.edges
    with pytest.raises(UsageError):
        parse_graph(tmp_path / "missing.txt")


def test_fixtures():
    path = parse_graph_text(PATH_GRAPH)
    triangle = parse_graph_text(TRIANGLE)
    assert solve_kpath(path, 3) == 3
    assert solve_kpath(triangle, 3) == 2
    assert solve_kpath(triangle, 4) == INFINITY
    assert brute_force_kpath(path, 3) == 3


def test_small_k_and_empty_graphs():
    g = WeightedDigraph(n=4, edges=[])
    assert solve_kpath(g, 1) == 0
    assert solve_kpath(g, 2) == INFINITY
    assert not solve_kpath_decision(g, 2)
    assert brute_force_kpath(g, 1) == 0


def test_decision_on_complete_digraph():
    edges = [(i, j, 1) for i in range(1, 6) for j in range(1, 6) if i != j]
    assert solve_kpath_decision(WeightedDigraph(n=5, edges=edges), 5)


def test_sparse_path_among_many_vertices(family_dir):
    g = WeightedDigraph(n=92, edges=[(35, 60, 1), (60, 63, 1), (63, 84, 1)])
    assert solve_kpath(g, 4, cache=FamilyCache(family_dir)) == 3


def test_weights_must_leave_room_for_k_steps():
    with pytest.raises(ParseError) as info:
        parse_graph_text(f"p kpath 2 1 2\ne 1 2 {MAX_WEIGHT + 1}\n")
    assert info.value.line == 2
    assert str(MAX_WEIGHT) in str(info.value)
    heaviest = parse_graph_text(f"p kpath 2 1 2\ne 1 2 {MAX_WEIGHT}\n")
    assert solve_kpath(heaviest, 2) == MAX_WEIGHT
    with pytest.raises(UsageError):
        solve_kpath(WeightedDigraph(n=2, edges=[(1, 2, 2**62)]), 2)


def test_k_out_of_range():
    g = random_digraph(13, 30, seed=3)
    with pytest.raises(UsageError):
        solve_kpath(g, 0)
    with pytest.raises(ResourceError):
        solve_kpath(g, 12)
    with pytest.raises(ResourceError):
        brute_force_kpath(random_digraph(15, 10), 3)


def test_self_loops_and_parallel_edges():
    g = WeightedDigraph(n=3, edges=[(1, 1, 0), (1, 2, 7), (1, 2, 2), (2, 3, 1)])
    assert g.in_edges()[2] == [(1, 2)]
    assert solve_kpath(g, 3) == 3


def test_random_digraph_is_seeded():
    a, b = random_digraph(8, 20, seed=5), random_digraph(8, 20, seed=5)
    assert a.edges == b.edges and a.m == 20
    assert all(0 <= w <= 9 for _, _, w in a.edges)


@settings(max_examples=20, deadline=None)
@given(g=digraphs(), k=st.integers(2, 4))
def test_solver_matches_brute_force(pool, g, k):
    if k > g.n:
        assert solve_kpath(g, k) == INFINITY
        return
    expected = brute_force_kpath(g, k)
    assert solve_kpath(g, k, ctx=pool.get(g.n, k, CappedMinPlus(cap=k * g.max_weight))) == expected
    assert solve_kpath_decision(g, k, ctx=pool.get(g.n, k)) == (expected != INFINITY)


@settings(max_examples=10, deadline=None)
@given(g=digraphs(min_n=3, max_n=6), extra=st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(0, 9)))
def test_adding_an_edge_never_hurts(pool, g, extra):
    i, j, w = extra
    if max(i, j) > g.n:
        return
    bigger = WeightedDigraph(n=g.n, edges=g.edges + [(i, j, w)])
    ctx = pool.get(g.n, 3, CappedMinPlus(cap=27))
    assert brute_force_kpath(bigger, 3) <= brute_force_kpath(g, 3)
    assert solve_kpath(bigger, 3, ctx=ctx) <= solve_kpath(g, 3, ctx=ctx)


def test_threaded_layers_match_serial():
    g = random_digraph(9, 25, seed=11)
    with ThreadPoolExecutor(max_workers=3) as executor:
        assert solve_kpath(g, 4, executor=executor) == solve_kpath(g, 4) == brute_force_kpath(g, 4)


def test_context_must_fit(pool):
    g = random_digraph(6, 12, seed=2)
    with pytest.raises(UsageError):
        solve_kpath(g, 3, ctx=pool.get(6, 3))
    with pytest.raises(UsageError):
        solve_kpath_decision(g, 4, ctx=pool.get(6, 3))


@pytest.mark.parametrize("seed", range(4))
def test_reduction_to_circuits(pool, seed):
    g = random_digraph(5, 10, seed=seed)
    k = 3
    semiring = CappedMinPlus(cap=k * g.max_weight)
    circuit = kpath_as_circuit(g, k)
    assert circuit.d == 1
    assert monomial_sum(circuit, k, semiring, ctx=pool.get(5, k, semiring)).value == solve_kpath(g, k)


def test_reduction_without_edges():
    g = WeightedDigraph(n=3, edges=[])
    circuit = kpath_as_circuit(g, 2)
    assert monomial_sum(circuit, 2, CappedMinPlus(cap=0)).value == INFINITY


def test_reduction_without_edges_in_the_boolean_semiring():
    circuit = kpath_as_circuit(WeightedDigraph(n=3, edges=[]), 2)
    assert parse_circuit_text(format_circuit(circuit)).output == circuit.output
    assert monomial_sum(circuit, 2, BooleanSemiring()).value == 0
