"""Frozen reference data shared across the test suite.

Nine composite keys over source-file paths and commit timestamps, one extra
key used by the split-on-insert checks, and the exact structures various
layers must produce for them: discriminative positions, interleavings, the
leaf-capacity-2 trie with its serialized node sizes, streaming partition
positions, and one query with its matching refs. Tests treat every byte here
as an immutable expectation.
"""

from rscas.core_keys import CompositeKey, Dimension
from rscas.interleave import InterleavedTuple

P, V, BOTTOM = Dimension.PATH, Dimension.VALUE, Dimension.BOTTOM


def _ref(prefix_hex: str) -> bytes:
    return bytes.fromhex(prefix_hex + "00" * (20 - len(prefix_hex) // 2))


def _key(raw_path: str, value_hex: str, ref: bytes) -> CompositeKey:
    return CompositeKey(raw_path.encode() + b"\x00", bytes.fromhex(value_hex), ref)


R1 = _ref("a1a606b0b3")
R2 = _ref("d44739d8f8")
R3 = _ref("41d17a7b4d")
R4 = _ref("9698d9f506")
R5 = _ref("ffcaae8f57")
R6 = _ref("688d973cbe")
R7 = _ref("9907ee0a7b")
R8 = _ref("c0ffee0001")

K1 = _key("/Sources/Map.go", "000000005da8942a", R1)
K2 = _key("/crypto/ecc.h", "000000005fbd8dc4", R2)
K3 = _key("/crypto/ecc.c", "000000005fbd8dc4", R2)
K4 = _key("/Sources/Schema.go", "000000005da8948c", R3)
K5 = _key("/fs/ext3/inode.c", "000000005ef29c59", R4)
K6 = _key("/fs/ext4/inode.h", "000000005ebd23c2", R5)
K7 = _key("/fs/ext4/inode.c", "000000005fbd3d5a", R6)
K8 = _key("/Sources/Schedule.go", "000000005da8978b", R7)
K9 = _key("/Sources/Scheduler.go", "000000005da8978b", R7)
K10 = _key("/crypto/rsa.c", "000000005f83b9ac", R8)

ALL_KEYS = [K1, K2, K3, K4, K5, K6, K7, K8, K9]

# Discriminative positions of the nested key sets around K9, (path, value).
DSC_TABLE = [
    ([K1, K2, K3, K4, K5, K6, K7, K8, K9], 2, 5),
    ([K1, K4, K8, K9], 10, 7),
    ([K4, K8, K9], 14, 7),
    ([K8, K9], 18, 9),
    ([K9], 23, 9),
]

# Partition refinement isolating K9, as (key set, split dimension) pairs.
SEQUENCE_K9_TAU2 = [
    ([K1, K2, K3, K4, K5, K6, K7, K8, K9], V),
    ([K1, K4, K8, K9], P),
    ([K4, K8, K9], V),
    ([K8, K9], BOTTOM),
]
SEQUENCE_K9_TAU1 = SEQUENCE_K9_TAU2[:3] + [
    ([K8, K9], P),
    ([K9], BOTTOM),
]


def _t(s_p: bytes, s_v_hex: str, dim: Dimension, value_first: bool) -> InterleavedTuple:
    return InterleavedTuple(s_p, bytes.fromhex(s_v_hex), dim, value_first)


_ROOT_T = _t(b"/", "00000000", V, True)
_SRC_T = _t(b"Sources/", "5da8", P, True)
_SCHE_T = _t(b"Sche", "", V, False)
_CRY_T = _t(b"", "5fbd", P, True)

# Interleaving of each key within ALL_KEYS at leaf capacity 2:
# (tuples, suffix path, suffix value, ref).
INTERLEAVINGS_TAU2 = {
    "K1": ([_ROOT_T, _SRC_T, _t(b"Map.go\x00", "942a", BOTTOM, False)], b"", b"", R1),
    "K2": ([_ROOT_T, _CRY_T, _t(b"crypto/ecc.", "8dc4", BOTTOM, False)], b"h\x00", b"", R2),
    "K3": ([_ROOT_T, _CRY_T, _t(b"crypto/ecc.", "8dc4", BOTTOM, False)], b"c\x00", b"", R2),
    "K4": ([_ROOT_T, _SRC_T, _SCHE_T, _t(b"ma.go\x00", "948c", BOTTOM, True)], b"", b"", R3),
    "K5": ([_ROOT_T, _t(b"fs/ext", "5e", BOTTOM, True)], b"3/inode.c\x00",
           bytes.fromhex("f29c59"), R4),
    "K6": ([_ROOT_T, _t(b"fs/ext", "5e", BOTTOM, True)], b"4/inode.h\x00",
           bytes.fromhex("bd23c2"), R5),
    "K7": ([_ROOT_T, _CRY_T, _t(b"fs/ext4/inode.c\x00", "3d5a", BOTTOM, False)], b"", b"", R6),
    "K8": ([_ROOT_T, _SRC_T, _SCHE_T, _t(b"dule", "978b", BOTTOM, True)], b".go\x00", b"", R7),
    "K9": ([_ROOT_T, _SRC_T, _SCHE_T, _t(b"dule", "978b", BOTTOM, True)], b"r.go\x00", b"", R7),
}

KEY_BY_NAME = {"K1": K1, "K2": K2, "K3": K3, "K4": K4, "K5": K5, "K6": K6,
               "K7": K7, "K8": K8, "K9": K9}

# The leaf-capacity-2 trie over ALL_KEYS, nodes in on-disk pre-order.
# (name, dim, s_P, s_V, serialized size, children {branch byte: name} or
# suffix list [(s_P, s_V, ref)]).
GOLDEN_TRIE = [
    ("n1", V, b"/", bytes.fromhex("00000000"), 30, {0x5D: "n2", 0x5E: "n7", 0x5F: "n8"}),
    ("n2", P, b"Sources/", bytes.fromhex("5da8"), 28, {0x4D: "n3", 0x53: "n4"}),
    ("n3", BOTTOM, b"Map.go\x00", bytes.fromhex("942a"), 35, [(b"", b"", R1)]),
    ("n4", V, b"Sche", b"", 22, {0x94: "n5", 0x97: "n6"}),
    ("n5", BOTTOM, b"ma.go\x00", bytes.fromhex("948c"), 34, [(b"", b"", R3)]),
    ("n6", BOTTOM, b"dule", bytes.fromhex("978b"), 63,
     [(b".go\x00", b"", R7), (b"r.go\x00", b"", R7)]),
    ("n7", BOTTOM, b"fs/ext", bytes.fromhex("5e"), 81,
     [(b"3/inode.c\x00", bytes.fromhex("f29c59"), R4),
      (b"4/inode.h\x00", bytes.fromhex("bd23c2"), R5)]),
    ("n8", P, b"", bytes.fromhex("5fbd"), 20, {0x63: "n9", 0x66: "n10"}),
    ("n9", BOTTOM, b"crypto/ecc.", bytes.fromhex("8dc4"), 65,
     [(b"h\x00", b"", R2), (b"c\x00", b"", R2)]),
    ("n10", BOTTOM, b"fs/ext4/inode.c\x00", bytes.fromhex("3d5a"), 44, [(b"", b"", R6)]),
]

GOLDEN_TRIE_TOTAL_BYTES = 422  # sum of the sizes above

# Sizes the acceptance contract lists for the same build; n9 disagrees with a
# byte-level recount of its own path slice (11 content bytes, printed size
# assumes 10) and the stated total matches neither listing.
CONTRACT_NODE_SIZES = [30, 28, 35, 22, 34, 63, 81, 20, 64, 44]
CONTRACT_TOTAL_BYTES = 431

# Streaming partitioning positions (g_path, g_value, key count).
ROOT_PARTITION_POSITIONS = (2, 5, 9)
ROOT_SPLIT_VALUE = {0x5D: (9, 3, 4), 0x5E: (7, 2, 2), 0x5F: (1, 3, 3)}
SUBSPLIT_5D_PATH = {0x4D: (8, 3, 1), 0x53: (5, 1, 3)}

# One query: wildcard pattern plus an inclusive timestamp year range.
GOLDEN_QUERY_PATTERN = "/fs/ext*/*.c"
GOLDEN_QUERY_LOW = 1577836800  # 0x5e0be100
GOLDEN_QUERY_HIGH = 1609459199  # 0x5fee65ff
GOLDEN_QUERY_REFS = sorted([R4, R6])

# Inserting K10 into the trie above splits n8 on its value slice; these are
# the three reshaped nodes (new parent, new sibling leaf, surviving node).
K10_SPLIT = {
    "parent": (V, b"", bytes.fromhex("5f")),
    "sibling": (b"crypto/rsa.c\x00", bytes.fromhex("83b9ac"), R8),
    "survivor": (P, b"", bytes.fromhex("bd")),
}
