from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rscas.core_keys import CompositeKey, encode_value
from rscas.mem_trie import AdaptiveChildren, MemNode, MemTrie

from fixture_keys import GOLDEN_TRIE, BOTTOM

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA_DIR = Path(__file__).parent / "data"

_LABELS = ["a", "b", "ab", "ba", "x", "ax"]


@st.composite
def key_strategy(draw, value_length: int = 8) -> CompositeKey:
    depth = draw(st.integers(min_value=0, max_value=3))
    labels = [draw(st.sampled_from(_LABELS)) for _ in range(depth)]
    raw = ("/" + "/".join(labels)).encode() if labels else b"/"
    # Small values collide on long prefixes, large ones scatter; both matter.
    value = draw(st.one_of(st.integers(0, 6), st.integers(0, 2 ** 64 - 1)))
    ref = draw(st.binary(min_size=20, max_size=20))
    return CompositeKey(raw + b"\x00", encode_value(value, value_length), ref)


def key_lists(min_size: int = 1, max_size: int = 40):
    return st.lists(key_strategy(), min_size=min_size, max_size=max_size)


@st.composite
def pattern_strategy(draw) -> str:
    count = draw(st.integers(min_value=1, max_value=4))
    labels = []
    for _ in range(count):
        kind = draw(st.sampled_from(["lit", "star", "dstar", "mixed"]))
        if kind == "lit":
            labels.append(draw(st.sampled_from(_LABELS)))
        elif kind == "star":
            labels.append("*")
        elif kind == "dstar":
            labels.append("**")
        else:
            labels.append(draw(st.sampled_from(["a*", "*b", "a*b", "*a*", "ab*"])))
    return "/" + "/".join(labels)


@st.composite
def bounds_strategy(draw, value_length: int = 8) -> tuple[bytes, bytes]:
    a = draw(st.one_of(st.integers(0, 8), st.integers(0, 2 ** 64 - 1)))
    b = draw(st.one_of(st.integers(0, 8), st.integers(0, 2 ** 64 - 1)))
    low, high = min(a, b), max(a, b)
    return encode_value(low, value_length), encode_value(high, value_length)


def build_golden_mem_trie() -> MemTrie:
    """The reference trie assembled node by node (not via inserts)."""
    nodes: dict[str, MemNode] = {}
    for name, dim, s_p, s_v, _size, payload in reversed(GOLDEN_TRIE):
        if dim is BOTTOM:
            node = MemNode(dim, s_p, s_v, None, list(payload))
        else:
            table = AdaptiveChildren()
            for byte, child_name in payload.items():
                table.set(byte, nodes[child_name])
            node = MemNode(dim, s_p, s_v, table, None)
        nodes[name] = node
    trie = MemTrie(value_length=8)
    trie.root = nodes["n1"]
    trie.key_count = 9
    return trie


@pytest.fixture
def fixture_tsv_path() -> Path:
    return DATA_DIR / "fixture.tsv"
