"""Mutable in-memory trie over interleaved composite keys.

Nodes carry a path slice and a value slice side by side; inner nodes branch on
the byte one dimension contributes right after the node's slices. The branch
byte is stored both in the parent's child table and as the first byte of the
child's slice in the branch dimension, so a child is self-describing.

Inserts descend matching slices byte by byte. A mismatch inside a node's
slices splits that node in place: a fresh parent takes the shared slice
prefixes, the old node keeps the remainders, and the new key moves into a
sibling leaf. Nothing else moves, so an insert touches at most one path of
nodes and allocates exactly two.

Child tables are adaptive: they start with capacity for 4 entries and grow
through 16 and 48 to a full 256-slot array as siblings accumulate, which
keeps small fanouts cheap without bounding large ones.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from typing import Iterator, Optional

from .core_keys import CompositeKey, Dimension

_CLASSES = (4, 16, 48, 256)
_NO_SLOT = 0xFF


class MemTrieFullError(RuntimeError):
    """Insert attempted while the trie is at its configured capacity."""


class AdaptiveChildren:
    """Byte-keyed child map with growing capacity classes (4, 16, 48, 256)."""

    __slots__ = ("capacity_class", "_keys", "_nodes", "_index", "_slots")

    def __init__(self) -> None:
        self.capacity_class = 4
        self._keys: list[int] = []
        self._nodes: list[MemNode] = []
        self._index: Optional[bytearray] = None  # class 48: byte -> slot
        self._slots: Optional[list] = None  # classes 48/256

    def __len__(self) -> int:
        if self.capacity_class <= 16:
            return len(self._keys)
        if self.capacity_class == 48:
            return len(self._slots)
        return sum(1 for n in self._slots if n is not None)

    def get(self, byte: int) -> Optional["MemNode"]:
        if self.capacity_class <= 16:
            i = bisect_left(self._keys, byte)
            if i < len(self._keys) and self._keys[i] == byte:
                return self._nodes[i]
            return None
        if self.capacity_class == 48:
            slot = self._index[byte]
            return self._slots[slot] if slot != _NO_SLOT else None
        return self._slots[byte]

    def set(self, byte: int, node: "MemNode") -> None:
        if self.capacity_class <= 16:
            i = bisect_left(self._keys, byte)
            if i < len(self._keys) and self._keys[i] == byte:
                self._nodes[i] = node
                return
            if len(self._keys) >= self.capacity_class:
                self._grow()
                self.set(byte, node)
                return
            self._keys.insert(i, byte)
            self._nodes.insert(i, node)
        elif self.capacity_class == 48:
            slot = self._index[byte]
            if slot != _NO_SLOT:
                self._slots[slot] = node
                return
            if len(self._slots) >= 48:
                self._grow()
                self.set(byte, node)
                return
            self._index[byte] = len(self._slots)
            self._slots.append(node)
        else:
            self._slots[byte] = node

    def _grow(self) -> None:
        cls = _CLASSES[_CLASSES.index(self.capacity_class) + 1]
        if cls == 16:
            self.capacity_class = 16
            return
        if cls == 48:
            index = bytearray([_NO_SLOT]) * 256
            slots = []
            for b, n in zip(self._keys, self._nodes):
                index[b] = len(slots)
                slots.append(n)
            self._index, self._slots = index, slots
            self._keys, self._nodes = [], []
        else:
            slots = [None] * 256
            for b, n in self.items():
                slots[b] = n
            self._index, self._slots = None, slots
        self.capacity_class = cls

    def items(self) -> Iterator[tuple[int, "MemNode"]]:
        """Children in ascending branch-byte order."""
        if self.capacity_class <= 16:
            yield from zip(self._keys, self._nodes)
        elif self.capacity_class == 48:
            for b in range(256):
                slot = self._index[b]
                if slot != _NO_SLOT:
                    yield b, self._slots[slot]
        else:
            for b in range(256):
                node = self._slots[b]
                if node is not None:
                    yield b, node


class MemNode:
    __slots__ = ("dim", "s_P", "s_V", "child_table", "suffix_list")

    def __init__(self, dim: Dimension, s_P: bytes, s_V: bytes,
                 child_table: Optional[AdaptiveChildren],
                 suffix_list: Optional[list[tuple[bytes, bytes, bytes]]]):
        self.dim = dim
        self.s_P = s_P
        self.s_V = s_V
        self.child_table = child_table
        self.suffix_list = suffix_list

    @classmethod
    def leaf(cls, s_P: bytes, s_V: bytes, ref: bytes) -> "MemNode":
        return cls(Dimension.BOTTOM, s_P, s_V, None, [(b"", b"", ref)])

    @classmethod
    def inner(cls, dim: Dimension, s_P: bytes, s_V: bytes) -> "MemNode":
        return cls(dim, s_P, s_V, AdaptiveChildren(), None)

    @property
    def is_leaf(self) -> bool:
        return self.child_table is None

    def children(self) -> Iterator[tuple[int, "MemNode"]]:
        return self.child_table.items()

    def suffixes(self) -> Iterator[tuple[bytes, bytes, bytes]]:
        return iter(self.suffix_list)


def _match_len(slice_: bytes, data: bytes, offset: int) -> int:
    limit = min(len(slice_), len(data) - offset)
    i = 0
    while i < limit and slice_[i] == data[offset + i]:
        i += 1
    return i


class MemTrie:
    """Mutable trie; capacity, when set, is enforced as a hard key-count cap."""

    def __init__(self, value_length: int, capacity: Optional[int] = None):
        self.value_length = value_length
        self.capacity = capacity
        self.root: Optional[MemNode] = None
        self.key_count = 0

    def insert(self, key: CompositeKey) -> None:
        if self.capacity is not None and self.key_count >= self.capacity:
            raise MemTrieFullError(f"trie at capacity {self.capacity}")
        assert len(key.value) == self.value_length
        if self.root is None:
            self.root = MemNode.leaf(key.path, key.value, key.ref)
            self.key_count = 1
            return
        node, parent = self.root, None
        g_p = g_v = 0  # consumed key bytes per dimension
        while True:
            m_p = _match_len(node.s_P, key.path, g_p)
            m_v = _match_len(node.s_V, key.value, g_v)
            g_p += m_p
            g_v += m_v
            if g_p == len(key.path) and g_v == len(key.value):
                # Prefix-free components: a fully consumed key can only land
                # on a leaf whose slices matched to the end.
                assert node.is_leaf and m_p == len(node.s_P) and m_v == len(node.s_V)
                node.suffix_list.append((b"", b"", key.ref))
                self.key_count += 1
                return
            if m_p < len(node.s_P) or m_v < len(node.s_V):
                self._restructure(key, node, parent, g_p, g_v, m_p, m_v)
                self.key_count += 1
                return
            assert not node.is_leaf, "leaf fully matched but key bytes remain"
            if node.dim is Dimension.PATH:
                assert g_p < len(key.path), "branch dimension exhausted below an inner node"
                byte = key.path[g_p]
            else:
                assert g_v < len(key.value), "branch dimension exhausted below an inner node"
                byte = key.value[g_v]
            child = node.child_table.get(byte)
            if child is None:
                node.child_table.set(byte, MemNode.leaf(key.path[g_p:], key.value[g_v:], key.ref))
                self.key_count += 1
                return
            parent, node = node, child

    def _restructure(self, key: CompositeKey, node: MemNode, parent: Optional[MemNode],
                     g_p: int, g_v: int, m_p: int, m_v: int) -> None:
        """Split node at the first slice mismatch; the new key becomes a sibling.

        The split dimension prefers the single mismatching dimension; when
        both mismatch it alternates against the nearest branching ancestor
        (value at the root), which keeps dimensions interleaved.
        """
        path_mismatch = m_p < len(node.s_P)
        value_mismatch = m_v < len(node.s_V)
        if path_mismatch and not value_mismatch:
            dim = Dimension.PATH
        elif value_mismatch and not path_mismatch:
            dim = Dimension.VALUE
        elif parent is not None:
            dim = parent.dim.alternate()
        else:
            dim = Dimension.VALUE
        new_parent = MemNode.inner(dim, node.s_P[:m_p], node.s_V[:m_v])
        sibling = MemNode.leaf(key.path[g_p:], key.value[g_v:], key.ref)
        node.s_P = node.s_P[m_p:]
        node.s_V = node.s_V[m_v:]
        if dim is Dimension.PATH:
            b_sib, b_old = sibling.s_P[0], node.s_P[0]
        else:
            b_sib, b_old = sibling.s_V[0], node.s_V[0]
        assert b_sib != b_old, "split dimension must separate the two nodes"
        new_parent.child_table.set(b_sib, sibling)
        new_parent.child_table.set(b_old, node)
        if parent is None:
            self.root = new_parent
        elif parent.dim is Dimension.PATH:
            parent.child_table.set(new_parent.s_P[0], new_parent)
        else:
            parent.child_table.set(new_parent.s_V[0], new_parent)

    def iterate_keys(self) -> Iterator[CompositeKey]:
        """All stored keys, children in branch-byte order, duplicates in arrival order."""
        def walk(node: MemNode, acc_p: bytes, acc_v: bytes) -> Iterator[CompositeKey]:
            acc_p += node.s_P
            acc_v += node.s_V
            if node.is_leaf:
                for sp, sv, ref in node.suffix_list:
                    yield CompositeKey(acc_p + sp, acc_v + sv, ref)
                return
            for _, child in node.children():
                yield from walk(child, acc_p, acc_v)

        if self.root is not None:
            yield from walk(self.root, b"", b"")

    def node_count(self) -> int:
        def count(node: MemNode) -> int:
            if node.is_leaf:
                return 1
            return 1 + sum(count(c) for _, c in node.children())

        return count(self.root) if self.root else 0
