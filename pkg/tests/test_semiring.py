import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynrepset.core.semiring import (
    INFINITY,
    BooleanSemiring,
    CappedMinPlus,
    SemiringElement,
    lcu,
    make_semiring,
    total,
)
from dynrepset.errors import UsageError

from .strategies import elements_of, semiring_with_elements, semirings


@given(semiring_with_elements())
def test_semiring_axioms(drawn):
    semiring, (a, b, c) = drawn
    assert a + a == a
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) * c == a * c + b * c
    assert a + semiring.zero == a
    assert a * semiring.one == a == semiring.one * a
    assert (a * semiring.zero).is_zero


@given(semiring_with_elements())
def test_order_is_partial_order(drawn):
    _, (a, b, c) = drawn
    assert a <= a
    if a <= b and b <= a:
        assert a == b
    if a <= b and b <= c:
        assert a <= c
    # a + b is the ⪯-greatest lower bound
    assert (a + b) <= a and (a + b) <= b


@given(semirings.flatmap(lambda s: st.tuples(st.just(s), st.lists(elements_of(s), max_size=5), elements_of(s))))
def test_lcu_is_least_upper_bound(drawn):
    semiring, values, c = drawn
    top = lcu(values, semiring)
    assert all(v <= top for v in values)
    if all(v <= c for v in values):
        assert top <= c


def test_lcu_of_nothing_is_bottom():
    assert lcu([], BooleanSemiring()) == BooleanSemiring().one
    minplus = CappedMinPlus(cap=7)
    assert lcu([], minplus).value == 0
    with pytest.raises(UsageError):
        lcu([])


def test_minplus_saturates_at_cap():
    s = CappedMinPlus(cap=5)
    assert (s.element(3) * s.element(2)).value == 5
    assert (s.element(3) * s.element(4)).value == INFINITY
    assert s.element(6).is_zero
    assert (s.element(2) + s.element(4)).value == 2
    assert str(s.zero) == "INF"
    assert s.parse("inf") == s.zero
    assert s.parse(" 4 ").value == 4


def test_boolean_order_puts_one_below_zero():
    s = BooleanSemiring()
    assert s.one <= s.zero
    assert not s.zero <= s.one
    assert lcu([s.one, s.zero]) == s.zero
    assert str(s.one) == "1" and s.parse("false") == s.zero


@pytest.mark.parametrize("value", [-1, 1.5, "3", True])
def test_minplus_rejects_non_values(value):
    with pytest.raises(UsageError):
        CappedMinPlus(cap=3).element(value)


def test_mixing_semirings_is_a_usage_error():
    with pytest.raises(UsageError):
        BooleanSemiring().one + CappedMinPlus(cap=2).one
    with pytest.raises(UsageError):
        CappedMinPlus(cap=2).one * CappedMinPlus(cap=3).one


def test_make_semiring():
    assert make_semiring("Boolean") == BooleanSemiring()
    assert make_semiring("min-plus", 9) == CappedMinPlus(cap=9)
    with pytest.raises(UsageError):
        make_semiring("max-times")


def test_total_adds_everything():
    s = CappedMinPlus(cap=9)
    assert total([s.element(4), s.element(2), s.element(7)], s).value == 2
    assert total([], s).is_zero


@settings(max_examples=30, deadline=None)
@given(semirings, st.integers(min_value=0, max_value=2**32 - 1))
def test_masked_reductions_match_loops(semiring, seed):
    rng = np.random.default_rng(seed)
    codes = np.array(list(semiring.codes()), dtype=semiring.dtype)
    values = rng.choice(codes, size=(3, 5))
    mask = rng.random((4, 5)) < 0.5
    out = semiring.masked_lcu(values, mask)
    for b in range(3):
        for j in range(4):
            picked = [SemiringElement(semiring, values[b, c].item()) for c in range(5) if mask[j, c]]
            assert out[b, j].item() == lcu(picked, semiring).code

    summed = semiring.masked_sum(values[:, :4], mask)
    for b in range(3):
        for c in range(5):
            picked = [SemiringElement(semiring, values[b, j].item()) for j in range(4) if mask[j, c]]
            assert summed[b, c].item() == total(picked, semiring).code

    grand = semiring.masked_total(values[0], mask[0])
    picked = [SemiringElement(semiring, values[0, c].item()) for c in range(5) if mask[0, c]]
    assert grand == total(picked, semiring).code
