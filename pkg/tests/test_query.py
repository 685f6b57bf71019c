"""Tokenizer, resumable predicates, and trie query evaluation."""

import io

import pytest
from hypothesis import given, settings, strategies as st

from rscas.bulkload import BuildConfig, bulk_load_trie
from rscas.core_keys import encode_value
from rscas.disk_trie import TrieFile
from rscas.mem_trie import MemTrie
from rscas.query import (
    CasQuery,
    MatchOutcome,
    PathAutomaton,
    PathState,
    QueryGrammarError,
    T_DSTAR,
    T_LIT,
    T_SLASH,
    T_STAR,
    T_TERM,
    ValueState,
    cas_query,
    match_path,
    match_value,
    parse_query,
    parse_query_line,
    parse_value_bound,
    tokenize_pattern,
)

from conftest import build_golden_mem_trie, key_lists, pattern_strategy, bounds_strategy
from fixture_keys import (
    ALL_KEYS,
    GOLDEN_QUERY_HIGH,
    GOLDEN_QUERY_LOW,
    GOLDEN_QUERY_PATTERN,
    GOLDEN_QUERY_REFS,
)
from oracles import cas_filter, path_matches

LOW = encode_value(GOLDEN_QUERY_LOW)
HIGH = encode_value(GOLDEN_QUERY_HIGH)


# -- pattern grammar ---------------------------------------------------------


def test_tokenize_literal_pattern():
    assert tokenize_pattern(b"/a/b") == (
        (T_SLASH, 0), (T_LIT, ord("a")), (T_SLASH, 0), (T_LIT, ord("b")), (T_TERM, 0),
    )


def test_tokenize_wildcards():
    assert tokenize_pattern(b"/a*c") == (
        (T_SLASH, 0), (T_LIT, ord("a")), (T_STAR, 0), (T_LIT, ord("c")), (T_TERM, 0),
    )
    # '**' swallows the separator in front of it, so "/a/**" can match "/a".
    assert tokenize_pattern(b"/a/**") == (
        (T_SLASH, 0), (T_LIT, ord("a")), (T_DSTAR, 0), (T_TERM, 0),
    )
    assert tokenize_pattern(b"/**") == ((T_DSTAR, 0), (T_TERM, 0))


def test_tokenize_bare_root():
    assert tokenize_pattern(b"/") == ((T_SLASH, 0), (T_TERM, 0))


@pytest.mark.parametrize(
    "pattern,position",
    [
        (b"", 1),
        (b"a/b", 1),
        (b"//a", 2),
        (b"/a**b", 3),
        (b"/a/", 4),
        (b"/**x", 2),
        (b"/a\x00b", 3),
    ],
)
def test_tokenize_rejects_malformed(pattern, position):
    with pytest.raises(QueryGrammarError) as exc:
        tokenize_pattern(pattern)
    assert exc.value.position == position


# -- value predicate ---------------------------------------------------------


def test_match_value_staged_descent():
    """Range comparisons resume across slice boundaries during a descent."""
    state = ValueState()
    assert match_value(b"\x00\x00\x00\x00", LOW, HIGH, state) is MatchOutcome.INCOMPLETE
    assert (state.lo, state.hi) == (5, 5)

    below = state.clone()
    assert match_value(b"\x00\x00\x00\x00\x5d", LOW, HIGH, below) is MatchOutcome.MISMATCH

    onlow = state.clone()
    assert match_value(b"\x00\x00\x00\x00\x5e", LOW, HIGH, onlow) is MatchOutcome.INCOMPLETE
    assert (onlow.lo, onlow.hi) == (6, 5)

    onhigh = state.clone()
    assert match_value(b"\x00\x00\x00\x00\x5f", LOW, HIGH, onhigh) is MatchOutcome.INCOMPLETE
    assert (onhigh.lo, onhigh.hi) == (5, 6)


def test_match_value_endpoints_inclusive():
    assert match_value(LOW, LOW, HIGH, ValueState()) is MatchOutcome.MATCH
    assert match_value(HIGH, LOW, HIGH, ValueState()) is MatchOutcome.MATCH
    just_below = (GOLDEN_QUERY_LOW - 1).to_bytes(8, "big")
    assert match_value(just_below, LOW, HIGH, ValueState()) is MatchOutcome.MISMATCH
    just_above = (GOLDEN_QUERY_HIGH + 1).to_bytes(8, "big")
    assert match_value(just_above, LOW, HIGH, ValueState()) is MatchOutcome.MISMATCH


def test_match_value_decides_early_when_strictly_inside():
    # 0x...5E0C > low prefix and < high prefix: every completion is in range.
    out = match_value(b"\x00\x00\x00\x00\x5e\x0c", LOW, HIGH, ValueState())
    assert out is MatchOutcome.MATCH


@given(
    st.binary(min_size=4, max_size=4),
    st.binary(min_size=4, max_size=4),
    st.binary(min_size=4, max_size=4),
    st.lists(st.integers(0, 4), min_size=0, max_size=3),
)
def test_match_value_resume_equals_fresh(value, a, b, cuts):
    low, high = min(a, b), max(a, b)
    state = ValueState()
    outcome = None
    for cut in sorted(set(cuts)):
        outcome = match_value(value[:cut], low, high, state)
        fresh = match_value(value[:cut], low, high, ValueState())
        assert outcome == fresh
        if outcome is MatchOutcome.MISMATCH:
            return
    final = match_value(value, low, high, state)
    assert final == match_value(value, low, high, ValueState())
    assert final is (MatchOutcome.MATCH if low <= value <= high else MatchOutcome.MISMATCH)


# -- path predicate ----------------------------------------------------------


def _full_path(pattern: str, raw: bytes) -> MatchOutcome:
    automaton = PathAutomaton(tokenize_pattern(pattern.encode()))
    return match_path(raw + b"\x00", automaton, PathState(automaton.initial()))


def test_match_path_golden_pattern():
    assert _full_path("/fs/ext*/*.c", b"/fs/ext3/inode.c") is MatchOutcome.MATCH
    assert _full_path("/fs/ext*/*.c", b"/fs/ext4/super.c") is MatchOutcome.MATCH
    assert _full_path("/fs/ext*/*.c", b"/fs/ext4/inode.h") is MatchOutcome.MISMATCH
    assert _full_path("/fs/ext*/*.c", b"/fs/jfs/inode.c") is MatchOutcome.MISMATCH
    assert _full_path("/fs/ext*/*.c", b"/fs/ext3/a/b.c") is MatchOutcome.MISMATCH


def test_match_path_descendant_axis():
    assert _full_path("/a/**", b"/a") is MatchOutcome.MATCH
    assert _full_path("/a/**", b"/a/b/c") is MatchOutcome.MATCH
    assert _full_path("/a/**", b"/ab") is MatchOutcome.MISMATCH
    assert _full_path("/**", b"/") is MatchOutcome.MATCH
    assert _full_path("/**", b"/x/y") is MatchOutcome.MATCH
    assert _full_path("/a/**/b", b"/a/b") is MatchOutcome.MATCH
    assert _full_path("/a/**/b", b"/a/x/y/b") is MatchOutcome.MATCH
    assert _full_path("/a/**/b", b"/a") is MatchOutcome.MISMATCH


def test_match_path_star_matches_empty_label():
    assert _full_path("/*", b"/") is MatchOutcome.MATCH
    assert _full_path("/*c", b"/c") is MatchOutcome.MATCH


def test_match_path_resumes_across_slices():
    automaton = PathAutomaton(tokenize_pattern(b"/fs/ext*/*.c"))
    state = PathState(automaton.initial())
    assert match_path(b"/fs/ext", automaton, state) is MatchOutcome.INCOMPLETE
    assert state.consumed == 7
    assert match_path(b"/fs/ext3/inode.c\x00", automaton, state) is MatchOutcome.MATCH
    assert state.consumed == 17

    state = PathState(automaton.initial())
    assert match_path(b"/fz", automaton, state) is MatchOutcome.MISMATCH


@given(pattern_strategy(), key_lists(min_size=1, max_size=10))
def test_match_path_agrees_with_recursive_oracle(pattern, keys):
    for key in keys:
        got = _full_path(pattern, key.path[:-1])
        assert got is not MatchOutcome.INCOMPLETE
        assert (got is MatchOutcome.MATCH) == path_matches(pattern, key.path[:-1])


@given(pattern_strategy(), key_lists(min_size=1, max_size=5),
       st.lists(st.integers(0, 30), max_size=3))
def test_match_path_resume_equals_fresh(pattern, keys, cuts):
    automaton = PathAutomaton(tokenize_pattern(pattern.encode()))
    for key in keys:
        path = key.path
        state = PathState(automaton.initial())
        stopped = False
        for cut in sorted({min(c, len(path) - 1) for c in cuts}):
            out = match_path(path[:cut], automaton, state)
            assert out == match_path(path[:cut], automaton, PathState(automaton.initial()))
            if out is MatchOutcome.MISMATCH:
                stopped = True
                break
        if not stopped:
            final = match_path(path, automaton, state)
            assert final == _full_path(pattern, path[:-1])


# -- whole-query evaluation --------------------------------------------------


def test_cas_query_empty_trie():
    q = parse_query("/**", "0", str(2**64 - 1), 8)
    assert cas_query(None, q) == []
    assert cas_query(MemTrie(8).root, q) == []


def test_cas_query_golden_fixture():
    trie = build_golden_mem_trie()
    q = parse_query(GOLDEN_QUERY_PATTERN, str(GOLDEN_QUERY_LOW), str(GOLDEN_QUERY_HIGH), 8)
    assert sorted(cas_query(trie.root, q)) == GOLDEN_QUERY_REFS


@pytest.mark.parametrize(
    "pattern,low,high",
    [
        ("/**", 0, 2**64 - 1),
        ("/**", GOLDEN_QUERY_LOW, GOLDEN_QUERY_HIGH),
        ("/Sources/*", 0, 2**64 - 1),
        ("/Sources/**", 0, 2**64 - 1),
        ("/*/*.go", 0, 2**64 - 1),
        ("/fs/ext*/*.c", 0, GOLDEN_QUERY_LOW),
        ("/", 0, 2**64 - 1),
    ],
)
def test_cas_query_fixture_against_oracle(pattern, low, high):
    trie = build_golden_mem_trie()
    q = parse_query(pattern, str(low), str(high), 8)
    expected = cas_filter(ALL_KEYS, pattern, encode_value(low), encode_value(high))
    assert sorted(cas_query(trie.root, q)) == sorted(expected)


def test_cas_query_reports_duplicates_once_per_stored_key():
    trie = MemTrie(8)
    key_a = ALL_KEYS[0]
    trie.insert(key_a)
    trie.insert(key_a)
    q = parse_query("/**", "0", str(2**64 - 1), 8)
    assert cas_query(trie.root, q) == [key_a.ref, key_a.ref]


@given(key_lists(min_size=1, max_size=40), pattern_strategy(), bounds_strategy())
@settings(max_examples=150)
def test_cas_query_mem_trie_equals_filter(keys, pattern, bounds):
    low, high = bounds
    trie = MemTrie(8)
    for k in keys:
        trie.insert(k)
    q = CasQuery(pattern.encode(), low, high)
    assert sorted(cas_query(trie.root, q)) == sorted(cas_filter(keys, pattern, low, high))


@given(key_lists(min_size=1, max_size=40), pattern_strategy(), bounds_strategy(),
       st.sampled_from([1, 2, 5]))
@settings(max_examples=100, deadline=None)
def test_cas_query_disk_trie_equals_filter(keys, pattern, bounds, tau):
    low, high = bounds
    buf = io.BytesIO()
    bulk_load_trie(iter(keys), buf, BuildConfig(tau=tau, value_length=8))
    trie = TrieFile(buf, owns_handle=False)
    q = CasQuery(pattern.encode(), low, high)
    assert sorted(cas_query(trie.root(), q)) == sorted(cas_filter(keys, pattern, low, high))


# -- bound parsing -----------------------------------------------------------


def test_parse_value_bound_forms():
    assert parse_value_bound("255", 2) == b"\x00\xff"
    assert parse_value_bound("0x00FF", 2) == b"\x00\xff"
    assert parse_value_bound("0", 8) == b"\x00" * 8


@pytest.mark.parametrize("text", ["0xF", "0x" + "0" * 18, "abc", "-1", str(2**64)])
def test_parse_value_bound_rejects(text):
    with pytest.raises(QueryGrammarError):
        parse_value_bound(text, 8)


def test_parse_query_validates_range():
    with pytest.raises(QueryGrammarError):
        parse_query("/a", "9", "3", 8)
    with pytest.raises(QueryGrammarError):
        CasQuery(b"/a", b"\x00", b"\x00\x00")


def test_parse_query_line():
    q = parse_query_line("/a/* 3 9", 8)
    assert q.pattern == b"/a/*"
    assert q.v_low == encode_value(3) and q.v_high == encode_value(9)
    with pytest.raises(QueryGrammarError):
        parse_query_line("/a 3", 8)
