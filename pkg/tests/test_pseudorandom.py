import numpy as np
import pytest

from dynrepset.core.pseudorandom import (
    FamilyCache,
    SplitMix64,
    SplitterFamily,
    UniversalFamily,
    build_inner_splitter,
    build_outer_splitter,
    build_universal_family,
    format_splitter,
    format_universal,
    parse_splitter,
    parse_universal,
    splits,
    verify_splitter,
    verify_universal,
)
from dynrepset.errors import ParseError, UsageError, Verdict


def test_splitmix_is_deterministic():
    a, b = SplitMix64.for_params(1, 20, 4), SplitMix64.for_params(1, 20, 4)
    assert [a.next() for _ in range(5)] == [b.next() for _ in range(5)]
    assert SplitMix64.for_params(2, 20, 4).next() != SplitMix64.for_params(1, 20, 4).next()
    assert np.all(SplitMix64(7).array(50, 3) < 3)


def test_splits_literal_and_relabelled():
    assert not splits((1, 2, 2), {1, 2, 3}, 2)
    assert splits((1, 2, 2), {1, 2, 3}, 2, relabel=True)
    assert splits((2, 1, 1), {1, 2, 3}, 2)
    # ell = k^2: splitting means injective, in any blocks once relabelled
    assert splits((1, 2, 3), {1, 2, 3}, 9)
    assert not splits((4, 5, 6), {1, 2, 3}, 9)
    assert splits((4, 5, 6), {1, 2, 3}, 9, relabel=True)
    assert not splits((4, 4, 6), {1, 2, 3}, 9, relabel=True)


def test_splits_rejects_bad_elements():
    with pytest.raises(UsageError):
        splits((1, 2), {3}, 2)
    with pytest.raises(UsageError):
        splits((1, 5), {2}, 2)


def test_outer_splitter_is_identity_on_small_universes():
    family = build_outer_splitter(9, 4)
    assert len(family) == 1
    assert family.ell == 16
    assert verify_splitter(family) is Verdict.PASS


def test_greedy_outer_splitter_covers_every_set():
    family = build_outer_splitter(20, 4)
    assert family.tracked
    assert verify_splitter(family) is Verdict.PASS
    again = build_outer_splitter(20, 4)
    assert np.array_equal(family.maps, again.maps)


def test_inner_splitter_balances_blocks():
    family = build_inner_splitter(16, 4, 2)
    assert family.ell == 2
    assert verify_splitter(family) is Verdict.PASS
    assert build_inner_splitter(4, 4, 2).functions == [(1, 1, 2, 2)]


def test_outer_splitter_past_one_chunk_of_subsets_verifies():
    # C(92, 4) spans many streamed chunks
    family = build_outer_splitter(92, 4)
    assert family.tracked
    assert verify_splitter(family) is Verdict.PASS


def test_inner_splitter_on_a_smaller_domain():
    single = build_inner_splitter(81, 9, 3, domain=9)
    assert len(single) == 1 and single.span == 9
    assert verify_splitter(single) is Verdict.PASS
    family = build_inner_splitter(81, 9, 3, domain=12)
    assert family.maps.shape[1] == 81
    assert verify_splitter(family) is Verdict.PASS
    assert build_inner_splitter(16, 4, 2, domain=16).domain is None
    with pytest.raises(UsageError):
        build_inner_splitter(16, 4, 2, domain=3)


def test_splitter_over_tracking_budget_is_untracked(caplog):
    family = build_outer_splitter(30, 4, track_budget=10)
    assert not family.tracked
    # (ln C(30, 4) + 40 ln 2) / -ln(1 - p) with p = 16·15·14·13 / 16^4
    assert len(family) == 35
    assert "unchecked" in caplog.text


def test_inner_splitter_needs_square_k():
    with pytest.raises(UsageError):
        build_inner_splitter(16, 3, 2)


@pytest.mark.parametrize("u,s", [(6, 2), (9, 3), (16, 2)])
def test_universal_family_is_universal(u, s):
    family = build_universal_family(u, s)
    assert len(family) >= 2**s
    assert verify_universal(family) is Verdict.PASS


def test_dropping_a_universal_set_breaks_it():
    family = build_universal_family(6, 2)
    assert verify_universal(family.without(len(family) - 1)) is Verdict.FAIL


def test_verification_skips_over_budget():
    assert verify_splitter(build_outer_splitter(20, 4), budget=0) is Verdict.SKIP
    assert verify_universal(build_universal_family(6, 2), budget=0) is Verdict.SKIP


def test_splitter_that_misses_a_set_fails():
    family = SplitterFamily(5, 2, 4, np.zeros((1, 5), dtype=np.int64))
    assert verify_splitter(family) is Verdict.FAIL


def test_universal_matrix_matches_bitmasks():
    family = UniversalFamily(3, 1, (0b101, 0b010))
    assert family.matrix.tolist() == [[True, False, True], [False, True, False]]


def test_cache_format_round_trip():
    splitter = build_outer_splitter(20, 4)
    text = format_splitter(splitter)
    assert text.startswith(f"splitter 20 4 16 {len(splitter)}\n")
    assert format_splitter(parse_splitter(text)) == text
    universal = build_universal_family(6, 2)
    text = format_universal(universal)
    assert parse_universal(text).sets == universal.sets
    assert format_universal(parse_universal(text)) == text


@pytest.mark.parametrize("text", [
    "",
    "splitter 3 2 4\n",
    "splitter 3 2 4 1\n1 2\n",
    "splitter 3 2 4 1\n1 x 2\n",
    "splitter 3 2 4 1\n1 9 2\n",
    "splitter 3 2 4 1 colour=2\n1 1 2\n",
    "splitter 3 2 4 1 tracked=2\n1 1 2\n",
    "splitter 3 2 4 1 domain=1\n1 1 2\n",
])
def test_parse_splitter_errors(text):
    with pytest.raises(ParseError):
        parse_splitter(text)


def test_parse_universal_rejects_out_of_range_sets():
    with pytest.raises(ParseError):
        parse_universal("universal 3 1 1\nff\n")


def test_family_cache_writes_and_rereads(tmp_path):
    cache = FamilyCache(tmp_path / "cache")
    first = cache.universal(6, 2)
    assert (tmp_path / "cache" / "universal-6-2.txt").exists()
    assert cache.universal(6, 2).sets == first.sets
    outer = cache.outer(20, 4)
    assert np.array_equal(cache.outer(20, 4).maps, outer.maps)


def test_family_cache_rebuilds_corrupt_entries(tmp_path, caplog):
    cache = FamilyCache(tmp_path)
    (tmp_path / "inner-16-4-2.txt").write_text("garbage\n")
    family = cache.inner(16, 4, 2)
    assert verify_splitter(family) is Verdict.PASS
    assert "family cache" in caplog.text
    assert parse_splitter((tmp_path / "inner-16-4-2.txt").read_text()).n == 16


def test_splitter_header_keeps_domain_and_tracking():
    family = build_outer_splitter(30, 4, track_budget=10)
    text = format_splitter(family)
    assert text.splitlines()[0] == f"splitter 30 4 16 {len(family)} tracked=0"
    again = parse_splitter(text)
    assert not again.tracked and again.domain is None
    inner = build_inner_splitter(81, 9, 3, domain=9)
    assert format_splitter(inner).splitlines()[0] == "splitter 81 9 3 1 domain=9"
    assert parse_splitter(format_splitter(inner)).span == 9


def test_family_cache_remembers_untracked_families(tmp_path):
    cache = FamilyCache(tmp_path)
    built = cache.outer(30, 4, track_budget=10)
    reread = FamilyCache(tmp_path).outer(30, 4)
    assert not reread.tracked
    assert np.array_equal(reread.maps, built.maps)


def test_family_cache_rebuilds_out_of_range_labels(tmp_path, caplog):
    (tmp_path / "outer-20-4.txt").write_text("splitter 20 4 16 1\n" + " ".join(["17"] * 20) + "\n")
    family = FamilyCache(tmp_path).outer(20, 4)
    assert verify_splitter(family) is Verdict.PASS
    assert "family cache" in caplog.text


def test_family_cache_rebuilds_entries_for_other_parameters(tmp_path, caplog):
    cache = FamilyCache(tmp_path)
    (tmp_path / "outer-20-4.txt").write_text(format_splitter(build_outer_splitter(9, 3)))
    family = cache.outer(20, 4)
    assert (family.n, family.k, family.ell) == (20, 4, 16)
    assert verify_splitter(family) is Verdict.PASS
    (tmp_path / "universal-6-2.txt").write_text(format_universal(build_universal_family(5, 2)))
    assert cache.universal(6, 2).u == 6
    assert "rebuilding" in caplog.text
