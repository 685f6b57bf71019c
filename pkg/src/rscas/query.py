"""Range-and-wildcard queries over content-and-structure tries.

A query pairs a wildcard path pattern with an inclusive value range. Both
predicates are evaluated incrementally while descending a trie: every node
contributes a few bytes of path and a few bytes of value, and each predicate
reports MATCH (decided true, final for the whole subtree), MISMATCH (decided
false, prune the subtree) or INCOMPLETE (undecided, keep descending). A MATCH
is sticky; leaves re-check only the predicates still undecided, once per
stored suffix.

The path pattern grammar: '/' separated labels; '*' inside a label matches
any run (possibly empty) of non-separator bytes; a label consisting of '**'
matches any run of whole labels, including none, and binds the separator
before it (so "/a/**" matches "/a" itself). Patterns are compiled to a small
nondeterministic automaton that is fed one byte at a time, which makes the
predicate resumable for free and gives the child-descent filter: descend into
a path-dimension child only if feeding its branch byte leaves the automaton
with at least one live state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .core_keys import PATH_TERMINATOR, Dimension

SEPARATOR = 0x2F  # '/'
STAR = 0x2A  # '*'


class MatchOutcome(enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    INCOMPLETE = "incomplete"


class QueryGrammarError(ValueError):
    """Malformed query; carries the 1-based byte position of the offence."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"position {position}: {reason}")
        self.position = position
        self.reason = reason


# Token kinds for compiled patterns.
T_SLASH = 0  # literal separator
T_LIT = 1  # one literal byte
T_STAR = 2  # within-label wildcard
T_DSTAR = 3  # descendant wildcard: zero or more (separator + label) groups
T_TERM = 4  # path terminator byte


def tokenize_pattern(pattern: bytes) -> tuple[tuple[int, int], ...]:
    """Compile pattern bytes to a token sequence, validating the grammar."""
    if not pattern:
        raise QueryGrammarError(1, "empty pattern")
    if pattern[0] != SEPARATOR:
        raise QueryGrammarError(1, "pattern must start with '/'")
    if PATH_TERMINATOR in pattern:
        raise QueryGrammarError(pattern.index(PATH_TERMINATOR) + 1, "pattern contains a zero byte")
    tokens: list[tuple[int, int]] = []
    if pattern == b"/":
        tokens.append((T_SLASH, 0))
        tokens.append((T_TERM, 0))
        return tuple(tokens)
    pos = 0
    while pos < len(pattern):
        assert pattern[pos] == SEPARATOR
        label_start = pos + 1
        end = pattern.find(SEPARATOR, label_start)
        if end < 0:
            end = len(pattern)
        label = pattern[label_start:end]
        if not label:
            raise QueryGrammarError(label_start + 1, "empty label")
        if label == b"**":
            tokens.append((T_DSTAR, 0))
        elif b"**" in label:
            raise QueryGrammarError(label_start + label.index(b"**") + 1,
                                    "'**' must stand alone as a whole label")
        else:
            tokens.append((T_SLASH, 0))
            for b in label:
                tokens.append((T_STAR, 0) if b == STAR else (T_LIT, b))
        pos = end
    tokens.append((T_TERM, 0))
    return tuple(tokens)


# Automaton states are (token_index, sub) pairs; sub=1 only exists for the
# descendant wildcard and means "inside a label of one of its groups".
State = tuple[int, int]


class PathAutomaton:
    """Byte-fed nondeterministic matcher for one compiled pattern."""

    def __init__(self, tokens: tuple[tuple[int, int], ...]):
        self.tokens = tokens
        self.accept = (len(tokens), 0)

    def closure(self, states: frozenset[State]) -> frozenset[State]:
        out = set(states)
        work = list(states)
        while work:
            idx, sub = work.pop()
            if idx >= len(self.tokens):
                continue
            kind = self.tokens[idx][0]
            skip = (sub == 1) or kind in (T_STAR, T_DSTAR)
            if skip:
                nxt = (idx + 1, 0)
                if nxt not in out:
                    out.add(nxt)
                    work.append(nxt)
        return frozenset(out)

    def initial(self) -> frozenset[State]:
        return self.closure(frozenset({(0, 0)}))

    def step(self, states: frozenset[State], byte: int) -> frozenset[State]:
        out: set[State] = set()
        for idx, sub in states:
            if idx >= len(self.tokens):
                continue  # past the terminator; nothing may follow
            kind, arg = self.tokens[idx]
            if kind == T_SLASH:
                if byte == SEPARATOR:
                    out.add((idx + 1, 0))
            elif kind == T_LIT:
                if byte == arg:
                    out.add((idx + 1, 0))
            elif kind == T_STAR:
                if byte != SEPARATOR and byte != PATH_TERMINATOR:
                    out.add((idx, 0))
            elif kind == T_DSTAR:
                if byte == SEPARATOR:
                    out.add((idx, 1))
                elif sub == 1 and byte != PATH_TERMINATOR:
                    out.add((idx, 1))
            else:  # T_TERM
                if byte == PATH_TERMINATOR:
                    out.add((idx + 1, 0))
        return self.closure(frozenset(out))

    def is_accepting(self, states: frozenset[State]) -> bool:
        return self.accept in states


@dataclass
class CasQuery:
    """A wildcard path pattern plus an inclusive value range."""

    pattern: bytes
    v_low: bytes
    v_high: bytes
    automaton: PathAutomaton = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.v_low) != len(self.v_high):
            raise QueryGrammarError(1, "value bounds must have equal width")
        if self.v_low > self.v_high:
            raise QueryGrammarError(1, "lower value bound exceeds upper bound")
        self.automaton = PathAutomaton(tokenize_pattern(self.pattern))

    @property
    def value_length(self) -> int:
        return len(self.v_low)


@dataclass
class ValueState:
    """Resume positions for the two range comparisons, 1-based.

    lo is maintained so that the first lo-1 buffered bytes equal the lower
    bound's first lo-1 bytes; if lo points inside the buffer the bytes differ
    there. Same for hi against the upper bound.
    """

    lo: int = 1
    hi: int = 1

    def clone(self) -> "ValueState":
        return ValueState(self.lo, self.hi)


def match_value(buff: bytes, v_low: bytes, v_high: bytes, state: ValueState) -> MatchOutcome:
    """Compare a growing value prefix against the range, resuming from state."""
    width = len(v_low)
    n = len(buff)
    assert n <= width, "value buffer longer than the value width"
    while state.lo <= n and state.lo <= width and buff[state.lo - 1] == v_low[state.lo - 1]:
        state.lo += 1
    while state.hi <= n and state.hi <= width and buff[state.hi - 1] == v_high[state.hi - 1]:
        state.hi += 1
    if state.lo <= n and buff[state.lo - 1] < v_low[state.lo - 1]:
        return MatchOutcome.MISMATCH
    if state.hi <= n and buff[state.hi - 1] > v_high[state.hi - 1]:
        return MatchOutcome.MISMATCH
    if n == width:
        return MatchOutcome.MATCH
    if (state.lo <= n and buff[state.lo - 1] > v_low[state.lo - 1]
            and state.hi <= n and buff[state.hi - 1] < v_high[state.hi - 1]):
        # Strictly inside both bounds already; every completion stays in range.
        return MatchOutcome.MATCH
    return MatchOutcome.INCOMPLETE


@dataclass
class PathState:
    """Automaton state set plus the number of path bytes consumed so far."""

    states: frozenset[State]
    consumed: int = 0

    def clone(self) -> "PathState":
        return PathState(self.states, self.consumed)


def match_path(buff: bytes, automaton: PathAutomaton, state: PathState) -> MatchOutcome:
    """Feed unconsumed path bytes to the automaton, resuming from state."""
    states = state.states
    terminated = False
    for i in range(state.consumed, len(buff)):
        byte = buff[i]
        states = automaton.step(states, byte)
        if byte == PATH_TERMINATOR:
            terminated = True
            assert i == len(buff) - 1, "terminator must be the final path byte"
        if not states:
            state.states = states
            state.consumed = i + 1
            return MatchOutcome.MISMATCH
    state.states = states
    state.consumed = len(buff)
    if terminated:
        return MatchOutcome.MATCH if automaton.is_accepting(states) else MatchOutcome.MISMATCH
    return MatchOutcome.INCOMPLETE


def _leaf_value_ok(buff_v: bytearray, suffix_v: bytes, query: CasQuery,
                   vstate: ValueState, decided: bool) -> bool:
    if decided:
        return True
    full = bytes(buff_v) + suffix_v
    return match_value(full, query.v_low, query.v_high, vstate.clone()) is MatchOutcome.MATCH


def _leaf_path_ok(buff_p: bytearray, suffix_p: bytes, query: CasQuery,
                  pstate: PathState, decided: bool) -> bool:
    if decided:
        return True
    full = bytes(buff_p) + suffix_p
    return match_path(full, query.automaton, pstate.clone()) is MatchOutcome.MATCH


def cas_query(root, query: CasQuery) -> list[bytes]:
    """Collect the refs of all keys matching both predicates.

    root is any node view exposing dim, s_P, s_V, is_leaf, children() in
    ascending branch-byte order, and suffixes() for leaves; None means an
    empty trie. Returns refs in depth-first traversal order (a multiset:
    duplicate keys contribute one ref each).
    """
    if root is None:
        return []
    results: list[bytes] = []
    automaton = query.automaton
    buff_p = bytearray()
    buff_v = bytearray()

    def visit(view, vstate: ValueState, pstate: PathState, v_done: bool, p_done: bool) -> None:
        mark_p, mark_v = len(buff_p), len(buff_v)
        buff_p.extend(view.s_P)
        buff_v.extend(view.s_V)
        try:
            if not v_done:
                out = match_value(bytes(buff_v), query.v_low, query.v_high, vstate)
                if out is MatchOutcome.MISMATCH:
                    return
                if out is MatchOutcome.MATCH:
                    v_done = True
            if not p_done:
                out = match_path(bytes(buff_p), automaton, pstate)
                if out is MatchOutcome.MISMATCH:
                    return
                if out is MatchOutcome.MATCH:
                    p_done = True
            if view.is_leaf:
                for suffix_p, suffix_v, ref in view.suffixes():
                    if (_leaf_value_ok(buff_v, suffix_v, query, vstate, v_done)
                            and _leaf_path_ok(buff_p, suffix_p, query, pstate, p_done)):
                        results.append(ref)
                return
            branch_value = view.dim is Dimension.VALUE
            n_v = len(buff_v)
            for byte, child in view.children():
                if branch_value and not v_done:
                    # The child's own value slice repeats the branch byte, but
                    # peeking here prunes whole subtrees without loading them.
                    if vstate.lo == n_v + 1 and byte < query.v_low[vstate.lo - 1]:
                        continue
                    if vstate.hi == n_v + 1 and byte > query.v_high[vstate.hi - 1]:
                        continue
                elif not branch_value and not p_done:
                    if not automaton.step(pstate.states, byte):
                        continue
                visit(child, vstate.clone(), pstate.clone(), v_done, p_done)
        finally:
            del buff_p[mark_p:]
            del buff_v[mark_v:]

    vstate = ValueState()
    pstate = PathState(automaton.initial())
    visit(root, vstate, pstate, False, False)
    return results


def parse_value_bound(text: str, value_length: int) -> bytes:
    """Parse a query value bound: decimal, or 0x-hex with one pair per byte."""
    if text.startswith("0x") or text.startswith("0X"):
        digits = text[2:]
        if len(digits) != 2 * value_length:
            raise QueryGrammarError(
                1, f"hex bound must have exactly {2 * value_length} digits, got {len(digits)}")
        try:
            return bytes.fromhex(digits)
        except ValueError:
            raise QueryGrammarError(1, "invalid hex bound") from None
    try:
        number = int(text, 10)
    except ValueError:
        raise QueryGrammarError(1, f"invalid decimal bound {text!r}") from None
    if number < 0 or number >= 1 << (8 * value_length):
        raise QueryGrammarError(1, f"bound {text} does not fit in {value_length} bytes")
    return number.to_bytes(value_length, "big")


def parse_query(pattern_text: str, low_text: str, high_text: str, value_length: int) -> CasQuery:
    return CasQuery(
        pattern=pattern_text.encode("utf-8"),
        v_low=parse_value_bound(low_text, value_length),
        v_high=parse_value_bound(high_text, value_length),
    )


def parse_query_line(line: str, value_length: int) -> CasQuery:
    """Parse "<pattern> <low> <high>" with single-space separation."""
    parts = line.split()
    if len(parts) != 3:
        raise QueryGrammarError(1, f"expected pattern, low, high; got {len(parts)} fields")
    return parse_query(parts[0], parts[1], parts[2], value_length)
