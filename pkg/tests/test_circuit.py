import pytest

from dynrepset.core.semiring import INFINITY, BooleanSemiring, CappedMinPlus
from dynrepset.errors import ParseError, ResourceError, SkewnessError, UsageError, ValidationError
from dynrepset.workers.circuit import (
    brute_force_expand,
    build_circuit,
    compute_monomial_lists,
    format_circuit,
    monomial_sum,
    parse_circuit,
    parse_circuit_text,
    random_skewed_circuit,
)
from dynrepset.workers.models import AddGate, ConstGate, MulGate, VarGate


BOOLEAN = BooleanSemiring()

X1_X2_PLUS_X3 = """\
p circuit 5 3 1 2
g 1 var 1
g 2 var 2
g 3 var 3
g 4 mul 1 2
g 5 add 4 3
output 5
"""

SQUARE = """\
p circuit 2 2 1 2
g 1 var 1
g 2 mul 1 1
"""

CHEAPEST_OF_TWO = """\
p circuit 6 1 1 1
g 1 var 1
g 2 const 3
g 3 const 5
g 4 mul 1 2
g 5 mul 1 3
g 6 add 4 5
"""

NOT_SKEWED = """\
p circuit 7 4 1 2
g 1 var 1
g 2 var 2
g 3 var 3
g 4 var 4
g 5 add 1 2
g 6 add 3 4
g 7 mul 5 6
"""


def test_parse_single_variable():
    c = parse_circuit_text("p circuit 1 1 1 1\ng 1 var 1\n")
    assert c.output == 1 and c.gates == [VarGate(1, 1)] and c.k == 1


def test_parse_orders_gates_topologically():
    c = parse_circuit_text("p circuit 3 2 1 0\ng 3 mul 1 2\ng 1 var 1\ng 2 var 2\n")
    assert [g.id for g in c.gates] == [1, 2, 3]
    assert c.k is None


def test_parse_infinite_constant():
    c = parse_circuit_text("p circuit 1 1 1 1\ng 1 const INF\n")
    assert c.gates[0].value == INFINITY and c.gates[0].text == "INF"


@pytest.mark.parametrize("text,error", [
    ("p circuit 2 2 1 1\ng 1 var 1\ng 2 var 2\n", ValidationError),
    ("p circuit 4 3 1 1\ng 1 var 1\ng 2 var 2\ng 3 var 3\ng 4 mul 1 2 3\n", ValidationError),
    ("p circuit 2 1 1 1\ng 1 add 2\ng 2 add 1\n", ValidationError),
    ("p circuit 1 1 1 1\ng 1 add 5\n", ValidationError),
    ("p circuit 1 1 1 1\ng 1 var 2\n", ParseError),
    ("p circuit 1 1 1 1\ng 1 const -1\n", ParseError),
    ("p circuit 2 1 1 1\ng 1 var 1\ng 1 var 1\n", ParseError),
    ("g 1 var 1\n", ParseError),
    ("p circuit 1 1 1 1\ng 1 nand 1\n", ParseError),
    ("p circuit 1 1 1 1\ng 1 var 1\noutput 7\n", ValidationError),
    ("# empty\n", ParseError),
])
def test_parse_rejects(text, error):
    with pytest.raises(error):
        parse_circuit_text(text)


def test_output_line_drops_unused_gates():
    c = parse_circuit_text("p circuit 3 2 1 1\ng 1 var 1\ng 2 var 2\ng 3 add 1\noutput 3\n")
    assert [g.id for g in c.gates] == [1, 3]


def test_parse_circuit_reads_files(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text(X1_X2_PLUS_X3)
    assert parse_circuit(path).output == 5
    with pytest.raises(UsageError):
        parse_circuit(tmp_path / "missing.txt")


def test_format_round_trip():
    c = random_skewed_circuit(5, 10, 2, CappedMinPlus(cap=30), seed=4)
    again = parse_circuit_text(format_circuit(c))
    assert again.gates == c.gates and again.output == c.output and again.d == c.d


def test_monomial_lists():
    c = build_circuit([VarGate(1, 1), AddGate(2, (1, 1)), VarGate(3, 2), MulGate(4, 2, 3)], n_vars=2, d=1)
    q = compute_monomial_lists(c, BOOLEAN)
    assert q[2] == [(frozenset({1}), BOOLEAN.one)]
    assert q[4] == [(frozenset({1, 2}), BOOLEAN.one)]


def test_monomial_lists_merge_coefficients():
    semiring = CappedMinPlus(cap=10)
    q = compute_monomial_lists(parse_circuit_text(CHEAPEST_OF_TWO), semiring)
    assert q[6] == [(frozenset({1}), semiring.element(3))]


def test_monomial_lists_give_up_past_d():
    q = compute_monomial_lists(parse_circuit_text(X1_X2_PLUS_X3), BOOLEAN)
    assert q[4] is not None and q[5] is None


def test_squares_vanish():
    q = compute_monomial_lists(parse_circuit_text(SQUARE), BOOLEAN)
    assert q[2] == []
    assert not monomial_sum(parse_circuit_text(SQUARE), 2, BOOLEAN).value


def test_skewness_is_enforced():
    with pytest.raises(SkewnessError):
        monomial_sum(parse_circuit_text(NOT_SKEWED), 2, BOOLEAN)


def test_monomial_sum_examples():
    assert monomial_sum(parse_circuit_text(X1_X2_PLUS_X3), 2, BOOLEAN).value
    assert monomial_sum(parse_circuit_text(X1_X2_PLUS_X3), 1, BOOLEAN).value
    assert monomial_sum(parse_circuit_text(CHEAPEST_OF_TWO), 1, CappedMinPlus(cap=10)).value == 3


def test_monomial_sum_with_a_dead_constant():
    semiring = CappedMinPlus(cap=10)
    c = build_circuit([VarGate(1, 1), VarGate(2, 2), ConstGate(3, INFINITY), MulGate(4, 1, 2), MulGate(5, 3, 4)],
                      n_vars=2, d=1)
    assert monomial_sum(c, 2, semiring).value == INFINITY
    assert brute_force_expand(c, 2, semiring).value == INFINITY


def test_monomial_sum_arguments(pool):
    c = parse_circuit_text(X1_X2_PLUS_X3)
    with pytest.raises(UsageError):
        monomial_sum(c, 0, BOOLEAN)
    with pytest.raises(UsageError):
        monomial_sum(c, 4, BOOLEAN)
    with pytest.raises(UsageError):
        monomial_sum(c, 2, CappedMinPlus(cap=3), ctx=pool.get(3, 2))
    wide = build_circuit([VarGate(1, 1)], n_vars=12, d=1)
    with pytest.raises(ResourceError):
        monomial_sum(wide, 12, BOOLEAN)
    with pytest.raises(ResourceError):
        brute_force_expand(build_circuit([VarGate(1, 1)], n_vars=17, d=1), 1, BOOLEAN)


@pytest.mark.parametrize("semiring", [BOOLEAN, CappedMinPlus(cap=40)], ids=["boolean", "minplus"])
@pytest.mark.parametrize("seed", range(6))
def test_random_circuits_match_expansion(pool, semiring, seed):
    n_vars, k = 5, 2 + seed % 2
    c = random_skewed_circuit(n_vars, 12, 2, semiring, seed=seed)
    expected = brute_force_expand(c, k, semiring)
    assert monomial_sum(c, k, semiring, ctx=pool.get(n_vars, k, semiring)) == expected


def test_random_circuits_are_seeded():
    a = random_skewed_circuit(4, 9, 1, BOOLEAN, seed=8)
    b = random_skewed_circuit(4, 9, 1, BOOLEAN, seed=8)
    assert a.gates == b.gates
