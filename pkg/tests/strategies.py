from hypothesis import strategies as st

from dynrepset.core.semiring import BooleanSemiring, CappedMinPlus
from dynrepset.workers.models import WeightedDigraph


BOOLEAN = BooleanSemiring()
MINPLUS = CappedMinPlus(cap=20)

semirings = st.sampled_from([BOOLEAN, MINPLUS, CappedMinPlus(cap=1)])


def elements_of(semiring):
    return st.sampled_from(semiring.elements())


@st.composite
def semiring_with_elements(draw, count=3):
    semiring = draw(semirings)
    return semiring, [draw(elements_of(semiring)) for _ in range(count)]


def subsets(n, max_size):
    return st.frozensets(st.integers(min_value=1, max_value=n), max_size=max_size)


@st.composite
def digraphs(draw, min_n=2, max_n=7, max_weight=9):
    n = draw(st.integers(min_value=min_n, max_value=max_n))
    edge = st.tuples(
        st.integers(min_value=1, max_value=n),
        st.integers(min_value=1, max_value=n),
        st.integers(min_value=0, max_value=max_weight),
    )
    edges = draw(st.lists(edge, max_size=3 * n))
    return WeightedDigraph(n=n, edges=edges)
