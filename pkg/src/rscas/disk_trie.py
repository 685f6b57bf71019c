"""Immutable trie files: compact node serialization and random access.

A trie file is a 28 byte preamble followed by the nodes of one trie in
gapless pre-order. Every node starts with one little-endian 32 bit header
word packing, from the least significant bit up: the branch dimension (2
bits: 0 leaf, 1 path, 2 value), the entry count m (9 bits), the path slice
length (10 bits), the value slice length (10 bits), one reserved bit. The
two slices follow the header. An inner node then stores m child entries of 7
bytes each: the branch byte plus a 48 bit little-endian absolute file offset.
A leaf stores m suffix entries: two 1 byte lengths, the two suffix slices,
and the fixed 20 byte ref.

The 9 bit entry count caps a leaf at 511 suffixes; exceeding that (more than
511 keys identical up to the leaf's position) is a serialization error.

Preamble: 8 byte magic, u16 format version, u8 value width, one reserved
byte, u64 key count, u64 root offset. The root directly follows the preamble.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO, Iterator, Optional

from .core_keys import CompositeKey, Dimension

MAGIC = b"CASTRIE\x00"
VERSION = 1
PREAMBLE = struct.Struct("<8sHBBQQ")
PREAMBLE_SIZE = PREAMBLE.size  # 28

HEADER_SIZE = 4
CHILD_ENTRY_SIZE = 7
SUFFIX_FIXED_SIZE = 22  # two length bytes plus the 20 byte ref
MAX_ENTRIES = 511
MAX_SLICE = 1023
MAX_OFFSET = (1 << 48) - 1

_DIM_TO_CODE = {Dimension.BOTTOM: 0, Dimension.PATH: 1, Dimension.VALUE: 2}
_CODE_TO_DIM = {0: Dimension.BOTTOM, 1: Dimension.PATH, 2: Dimension.VALUE}


class FormatError(ValueError):
    """Corrupt, truncated, or unserializable trie data."""


def pack_header(dim: Dimension, m: int, l_p: int, l_v: int) -> bytes:
    if not 0 <= m <= MAX_ENTRIES:
        raise FormatError(f"entry count {m} outside [0, {MAX_ENTRIES}]")
    if l_p > MAX_SLICE or l_v > MAX_SLICE:
        raise FormatError("slice longer than the 10 bit length field")
    word = _DIM_TO_CODE[dim] | (m << 2) | (l_p << 11) | (l_v << 21)
    return struct.pack("<I", word)


def unpack_header(data: bytes) -> tuple[Dimension, int, int, int]:
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated node header")
    (word,) = struct.unpack_from("<I", data)
    code = word & 0x3
    if code not in _CODE_TO_DIM:
        raise FormatError(f"invalid dimension code {code}")
    return _CODE_TO_DIM[code], (word >> 2) & 0x1FF, (word >> 11) & 0x3FF, (word >> 21) & 0x3FF


def inner_node_size(l_p: int, l_v: int, m: int) -> int:
    return HEADER_SIZE + l_p + l_v + CHILD_ENTRY_SIZE * m


def leaf_node_size(l_p: int, l_v: int, suffix_lengths: list[tuple[int, int]]) -> int:
    return (HEADER_SIZE + l_p + l_v
            + sum(SUFFIX_FIXED_SIZE + sp + sv for sp, sv in suffix_lengths))


def serialize_inner(dim: Dimension, s_p: bytes, s_v: bytes,
                    entries: list[tuple[int, int]]) -> bytes:
    """Entries are (branch byte, absolute child offset), ascending by byte."""
    if dim not in (Dimension.PATH, Dimension.VALUE):
        raise FormatError("inner node needs a branch dimension")
    if not entries:
        raise FormatError("inner node with no children")
    out = bytearray(pack_header(dim, len(entries), len(s_p), len(s_v)))
    out += s_p
    out += s_v
    prev = -1
    for byte, offset in entries:
        if byte <= prev:
            raise FormatError("child entries must be strictly ascending")
        if not 0 <= offset <= MAX_OFFSET:
            raise FormatError(f"child offset {offset} outside the 48 bit range")
        out.append(byte)
        out += offset.to_bytes(6, "little")
        prev = byte
    return bytes(out)


def serialize_leaf(s_p: bytes, s_v: bytes,
                   suffixes: list[tuple[bytes, bytes, bytes]]) -> bytes:
    if not suffixes:
        raise FormatError("leaf with no suffixes")
    if len(suffixes) > MAX_ENTRIES:
        raise FormatError(
            f"leaf holds {len(suffixes)} suffixes, format limit is {MAX_ENTRIES}")
    out = bytearray(pack_header(Dimension.BOTTOM, len(suffixes), len(s_p), len(s_v)))
    out += s_p
    out += s_v
    for sp, sv, ref in suffixes:
        if len(sp) > 255 or len(sv) > 255:
            raise FormatError("suffix slice longer than its 1 byte length field")
        out.append(len(sp))
        out.append(len(sv))
        out += sp
        out += sv
        out += ref
    return bytes(out)


def write_preamble(f: BinaryIO, value_length: int, key_count: int) -> None:
    f.write(PREAMBLE.pack(MAGIC, VERSION, value_length, 0, key_count, PREAMBLE_SIZE))


class DiskNodeView:
    """Parsed node bound to its file; children load lazily on demand."""

    __slots__ = ("_trie", "offset", "byte_size", "dim", "s_P", "s_V",
                 "child_entries", "_suffixes")

    def __init__(self, trie: "TrieFile", offset: int, byte_size: int, dim: Dimension,
                 s_p: bytes, s_v: bytes,
                 child_entries: Optional[list[tuple[int, int]]],
                 suffixes: Optional[list[tuple[bytes, bytes, bytes]]]):
        self._trie = trie
        self.offset = offset
        self.byte_size = byte_size
        self.dim = dim
        self.s_P = s_p
        self.s_V = s_v
        self.child_entries = child_entries
        self._suffixes = suffixes

    @property
    def is_leaf(self) -> bool:
        return self.child_entries is None

    def children(self) -> Iterator[tuple[int, "DiskNodeView"]]:
        for byte, offset in self.child_entries:
            yield byte, self._trie.node_at(offset)

    def suffixes(self) -> Iterator[tuple[bytes, bytes, bytes]]:
        return iter(self._suffixes)


class TrieFile:
    """Read-only random access to one serialized trie."""

    def __init__(self, f: BinaryIO, owns_handle: bool = True):
        self._f = f
        self._owns = owns_handle
        f.seek(0)
        head = f.read(PREAMBLE_SIZE)
        if len(head) < PREAMBLE_SIZE:
            raise FormatError("file shorter than the preamble")
        magic, version, value_length, _, key_count, root_offset = PREAMBLE.unpack(head)
        if magic != MAGIC:
            raise FormatError("bad magic; not a trie file")
        if version != VERSION:
            raise FormatError(f"unsupported format version {version}")
        self.value_length = value_length
        self.key_count = key_count
        self.root_offset = root_offset

    @classmethod
    def open(cls, path) -> "TrieFile":
        return cls(open(path, "rb"))

    def close(self) -> None:
        if self._owns:
            self._f.close()

    def __enter__(self) -> "TrieFile":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _read_exact(self, count: int, offset_context: int) -> bytes:
        data = self._f.read(count)
        if len(data) < count:
            raise FormatError(f"truncated node at offset {offset_context}")
        return data

    def node_at(self, offset: int) -> DiskNodeView:
        self._f.seek(offset)
        dim, m, l_p, l_v = unpack_header(self._read_exact(HEADER_SIZE, offset))
        s_p = self._read_exact(l_p, offset)
        s_v = self._read_exact(l_v, offset)
        if dim is Dimension.BOTTOM:
            if m == 0:
                raise FormatError(f"empty leaf at offset {offset}")
            suffixes = []
            size = HEADER_SIZE + l_p + l_v
            for _ in range(m):
                lengths = self._read_exact(2, offset)
                sp = self._read_exact(lengths[0], offset)
                sv = self._read_exact(lengths[1], offset)
                ref = self._read_exact(20, offset)
                suffixes.append((sp, sv, ref))
                size += SUFFIX_FIXED_SIZE + lengths[0] + lengths[1]
            return DiskNodeView(self, offset, size, dim, s_p, s_v, None, suffixes)
        if m == 0:
            raise FormatError(f"inner node without children at offset {offset}")
        raw = self._read_exact(CHILD_ENTRY_SIZE * m, offset)
        entries = []
        for i in range(m):
            rec = raw[i * CHILD_ENTRY_SIZE:(i + 1) * CHILD_ENTRY_SIZE]
            entries.append((rec[0], int.from_bytes(rec[1:], "little")))
        size = inner_node_size(l_p, l_v, m)
        return DiskNodeView(self, offset, size, dim, s_p, s_v, entries, None)

    def root(self) -> DiskNodeView:
        return self.node_at(self.root_offset)

    def iterate_keys(self) -> Iterator[CompositeKey]:
        """All stored keys in trie order, suffix entries in stored order."""
        def walk(view: DiskNodeView, acc_p: bytes, acc_v: bytes) -> Iterator[CompositeKey]:
            acc_p += view.s_P
            acc_v += view.s_V
            if view.is_leaf:
                for sp, sv, ref in view.suffixes():
                    yield CompositeKey(acc_p + sp, acc_v + sv, ref)
                return
            for _, child in view.children():
                yield from walk(child, acc_p, acc_v)

        if self.key_count:
            yield from walk(self.root(), b"", b"")

    def validate(self) -> int:
        """Check the gapless pre-order layout; returns the node count."""
        self._f.seek(0, io.SEEK_END)
        file_size = self._f.tell()
        count = 0

        def walk(offset: int) -> int:
            nonlocal count
            view = self.node_at(offset)
            count += 1
            end = offset + view.byte_size
            if not view.is_leaf:
                for _, child_offset in view.child_entries:
                    if child_offset != end:
                        raise FormatError(
                            f"child at {child_offset} does not follow its sibling run at {end}")
                    end = walk(child_offset)
            return end

        if self.key_count == 0:
            if file_size != PREAMBLE_SIZE:
                raise FormatError("empty trie file carries node bytes")
            return 0
        end = walk(self.root_offset)
        if end != file_size:
            raise FormatError(f"trailing bytes: nodes end at {end}, file size {file_size}")
        return count
