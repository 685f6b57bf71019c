"""External trie construction by recursive streaming partitioning.

Keys are spooled into a root partition, then recursively split on the byte at
the partition's discriminative position in alternating dimensions. One split
streams the input partition once and routes every key into one of up to 256
output partitions, stripping the bytes the child partitions share; the
discriminative positions of each output partition are maintained on the fly
against its first key, so no second pass is needed. Partitions whose parent
fit within the configured memory budget live in memory; all others are paged
to scratch files. Input partitions are consumed and deleted as they stream.

Nodes are written in gapless pre-order. A parent's size is known before its
children are built (the child count is the split's group count), so children
are laid out right after it and the parent's bytes are back-patched with one
seek once the child offsets are final.

The I/O counters record scratch page traffic only: reads and writes of
partition pages. Spooling the input stream into the root partition and
writing the final trie file are excluded; both are the same for any
construction strategy, and the counters exist to compare partitioning
schedules.
"""

from __future__ import annotations

import itertools
import shutil
import struct
import tempfile
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional

from .core_keys import CompositeKey, Dimension
from .disk_trie import (PREAMBLE_SIZE, FormatError, inner_node_size, serialize_inner,
                        serialize_leaf, write_preamble)

DEFAULT_PAGE_SIZE = 16384
_PAGE_LEN = struct.Struct("<I")


class NoKeysError(ValueError):
    """Bulk load invoked with an empty key stream."""


@dataclass
class BuildConfig:
    tau: int = 100
    memory_keys: int = 1_000_000
    page_size: int = DEFAULT_PAGE_SIZE
    value_length: int = 8
    scratch_dir: Optional[Path] = None
    # When set, pages hold exactly this many records regardless of byte size;
    # lets tests pin the page capacity B in keys.
    page_capacity_keys: Optional[int] = None


@dataclass
class IoCounters:
    pages_read: int = 0
    pages_written: int = 0

    def reset(self) -> None:
        self.pages_read = 0
        self.pages_written = 0

    def total(self) -> int:
        return self.pages_read + self.pages_written


class _MemoryBacking:
    __slots__ = ("pages",)

    def __init__(self) -> None:
        self.pages: list[bytes] = []

    def append_page(self, data: bytes) -> None:
        self.pages.append(data)

    def read_pages(self, counters: Optional[IoCounters]) -> Iterator[bytes]:
        while self.pages:
            yield self.pages.pop(0)

    def delete(self) -> None:
        self.pages.clear()


class _FileBacking:
    """Scratch pages framed as [u32 length][payload]; deleted after one read."""

    __slots__ = ("path", "counters", "count_writes", "_f")

    def __init__(self, path: Path, counters: Optional[IoCounters], count_writes: bool = True):
        self.path = path
        self.counters = counters
        self.count_writes = count_writes
        self._f: Optional[BinaryIO] = None

    def append_page(self, data: bytes) -> None:
        if self._f is None:
            self._f = open(self.path, "wb")
        self._f.write(_PAGE_LEN.pack(len(data)))
        self._f.write(data)
        if self.counters is not None and self.count_writes:
            self.counters.pages_written += 1

    def read_pages(self, counters: Optional[IoCounters]) -> Iterator[bytes]:
        if self._f is not None:
            self._f.close()
            self._f = None
        with open(self.path, "rb") as f:
            while True:
                head = f.read(_PAGE_LEN.size)
                if not head:
                    break
                (length,) = _PAGE_LEN.unpack(head)
                data = f.read(length)
                if len(data) < length:
                    raise FormatError(f"truncated scratch page in {self.path}")
                if counters is not None:
                    counters.pages_read += 1
                yield data
        self.delete()

    def delete(self) -> None:
        if self._f is not None:
            self._f.close()
            self._f = None
        self.path.unlink(missing_ok=True)


def _encode_record(path_rem: bytes, value_rem: bytes, ref: bytes) -> bytes:
    return bytes((len(path_rem), len(value_rem))) + path_rem + value_rem + ref


def _decode_records(page: bytes) -> Iterator[tuple[bytes, bytes, bytes]]:
    pos = 0
    end = len(page)
    while pos < end:
        l_p, l_v = page[pos], page[pos + 1]
        pos += 2
        path_rem = page[pos:pos + l_p]
        pos += l_p
        value_rem = page[pos:pos + l_v]
        pos += l_v
        ref = page[pos:pos + 20]
        pos += 20
        yield path_rem, value_rem, ref


class _PageWriter:
    __slots__ = ("backing", "cfg", "buf", "records")

    def __init__(self, backing, cfg: BuildConfig):
        self.backing = backing
        self.cfg = cfg
        self.buf = bytearray()
        self.records = 0

    def add(self, record: bytes) -> None:
        if self.records:
            if self.cfg.page_capacity_keys is not None:
                if self.records >= self.cfg.page_capacity_keys:
                    self.flush()
            elif len(self.buf) + len(record) > self.cfg.page_size:
                self.flush()
        self.buf += record
        self.records += 1

    def flush(self) -> None:
        if self.records:
            self.backing.append_page(bytes(self.buf))
            self.buf.clear()
            self.records = 0


@dataclass
class Partition:
    """One key multiset awaiting its split, stored as stripped remainders.

    g_p and g_v are the 1-based discriminative positions of the stored
    remainders; prefix_p and prefix_v are the shared remainder prefixes up to
    those positions (the slices of the node this partition will become).
    first_path_len and first_value_len record the remainder widths of the
    first key, which decide whether a dimension can still split: it can
    exactly when its discriminative position lies within the stored bytes.
    """

    size: int
    g_p: int
    g_v: int
    prefix_p: bytes
    prefix_v: bytes
    first_path_len: int
    first_value_len: int
    backing: object

    def in_memory(self) -> bool:
        return isinstance(self.backing, _MemoryBacking)

    def splits(self, dim: Dimension) -> bool:
        if dim is Dimension.PATH:
            return self.g_p <= self.first_path_len
        return self.g_v <= self.first_value_len

    def consume(self, counters: Optional[IoCounters]) -> Iterator[tuple[bytes, bytes, bytes]]:
        for page in self.backing.read_pages(counters):
            yield from _decode_records(page)

    def release(self) -> None:
        self.backing.delete()


class _Refiner:
    """Tracks a partition's discriminative positions against its first key."""

    __slots__ = ("g_p", "g_v", "ref_p", "ref_v")

    def __init__(self, path_rem: bytes, value_rem: bytes):
        self.ref_p = path_rem
        self.ref_v = value_rem
        self.g_p = len(path_rem) + 1
        self.g_v = len(value_rem) + 1

    def update(self, path_rem: bytes, value_rem: bytes) -> None:
        limit = min(self.g_p - 1, len(path_rem))
        j = 0
        while j < limit and path_rem[j] == self.ref_p[j]:
            j += 1
        self.g_p = j + 1
        limit = min(self.g_v - 1, len(value_rem))
        j = 0
        while j < limit and value_rem[j] == self.ref_v[j]:
            j += 1
        self.g_v = j + 1


class _Scratch:
    """Names and cleans up one build's scratch files."""

    def __init__(self, root: Path):
        self.root = root
        self.seq = itertools.count()
        root.mkdir(parents=True, exist_ok=True)

    def file(self, tag: str) -> Path:
        return self.root / f"part-{next(self.seq):06d}-{tag}.bin"

    def destroy(self) -> None:
        shutil.rmtree(self.root, ignore_errors=True)


def make_root_partition(keys: Iterable[CompositeKey], cfg: BuildConfig, scratch: _Scratch,
                        counters: Optional[IoCounters] = None,
                        known_positions: Optional[tuple[int, int]] = None) -> Optional[Partition]:
    """Spool a key stream into the build's first partition.

    Spill to scratch happens once the stream outgrows the memory budget;
    spooling writes are never counted (every build strategy pays them).
    When the caller already knows the stream's discriminative positions it
    passes them and the per-key refinement is skipped.
    """
    backing: object = _MemoryBacking()
    writer = _PageWriter(backing, cfg)
    refiner: Optional[_Refiner] = None
    count = 0
    for key in keys:
        key.validate(cfg.value_length)
        if refiner is None:
            refiner = _Refiner(key.path, key.value)
        elif known_positions is None:
            refiner.update(key.path, key.value)
        writer.add(_encode_record(key.path, key.value, key.ref))
        count += 1
        if count == cfg.memory_keys + 1 and isinstance(backing, _MemoryBacking):
            spilled = _FileBacking(scratch.file("root"), counters, count_writes=False)
            for page in backing.pages:
                spilled.append_page(page)
            backing = spilled
            writer.backing = spilled
    if refiner is None:
        return None
    writer.flush()
    g_p, g_v = (refiner.g_p, refiner.g_v) if known_positions is None else known_positions
    return Partition(
        size=count, g_p=g_p, g_v=g_v,
        prefix_p=refiner.ref_p[:g_p - 1], prefix_v=refiner.ref_v[:g_v - 1],
        first_path_len=len(refiner.ref_p), first_value_len=len(refiner.ref_v),
        backing=backing,
    )


def psi_stream(part: Partition, dim: Dimension, cfg: BuildConfig, scratch: _Scratch,
               counters: Optional[IoCounters]) -> dict[int, Partition]:
    """Split a partition on its discriminative byte in dim, one streaming pass.

    Returns the child partitions keyed by branch byte, ascending. Children
    hold remainders with the parent's shared prefixes stripped (the branch
    byte itself stays, in both dimensions, as the first divergent byte).
    Children are memory-resident exactly when the input partition fits the
    memory budget. The input partition is consumed and deleted.
    """
    g = part.g_p if dim is Dimension.PATH else part.g_v
    assert part.splits(dim), "split dimension is exhausted for this partition"
    in_memory = part.size <= cfg.memory_keys
    writers: dict[int, _PageWriter] = {}
    refiners: dict[int, _Refiner] = {}
    sizes: dict[int, int] = {}
    strip_p, strip_v = part.g_p - 1, part.g_v - 1
    for path_rem, value_rem, ref in part.consume(counters):
        comp = path_rem if dim is Dimension.PATH else value_rem
        byte = comp[g - 1]
        child_p = path_rem[strip_p:]
        child_v = value_rem[strip_v:]
        writer = writers.get(byte)
        if writer is None:
            backing = _MemoryBacking() if in_memory else _FileBacking(
                scratch.file(f"{byte:02x}"), counters)
            writer = writers[byte] = _PageWriter(backing, cfg)
            refiners[byte] = _Refiner(child_p, child_v)
            sizes[byte] = 0
        else:
            refiners[byte].update(child_p, child_v)
        writer.add(_encode_record(child_p, child_v, ref))
        sizes[byte] += 1
    out: dict[int, Partition] = {}
    for byte in sorted(writers):
        writers[byte].flush()
        refiner = refiners[byte]
        out[byte] = Partition(
            size=sizes[byte], g_p=refiner.g_p, g_v=refiner.g_v,
            prefix_p=refiner.ref_p[:refiner.g_p - 1], prefix_v=refiner.ref_v[:refiner.g_v - 1],
            first_path_len=len(refiner.ref_p), first_value_len=len(refiner.ref_v),
            backing=writers[byte].backing,
        )
    return out


@dataclass
class BuildReport:
    key_count: int = 0
    node_count: int = 0
    file_bytes: int = 0
    counters: IoCounters = field(default_factory=IoCounters)


def _build(part: Partition, dim: Dimension, pos: int, out: BinaryIO, cfg: BuildConfig,
           scratch: _Scratch, counters: Optional[IoCounters], report: BuildReport) -> int:
    """Write the subtree for one partition at pos; returns the end offset."""
    s_p, s_v = part.prefix_p, part.prefix_v
    if part.size > cfg.tau and (part.splits(Dimension.PATH) or part.splits(Dimension.VALUE)):
        d = dim if part.splits(dim) else dim.alternate()
        table = psi_stream(part, d, cfg, scratch, counters)
        size = inner_node_size(len(s_p), len(s_v), len(table))
        entries: list[tuple[int, int]] = []
        child_pos = pos + size
        for byte, child in table.items():
            entries.append((byte, child_pos))
            child_pos = _build(child, d.alternate(), child_pos, out, cfg, scratch,
                               counters, report)
        image = serialize_inner(d, s_p, s_v, entries)
        assert len(image) == size
        out.seek(pos)
        out.write(image)
        report.node_count += 1
        return child_pos
    suffixes = [(p[part.g_p - 1:], v[part.g_v - 1:], ref)
                for p, v, ref in part.consume(counters)]
    image = serialize_leaf(s_p, s_v, suffixes)
    out.seek(pos)
    out.write(image)
    report.node_count += 1
    return pos + len(image)


def bulk_load_trie(keys: Iterable[CompositeKey], out: BinaryIO, cfg: BuildConfig,
                   counters: Optional[IoCounters] = None,
                   known_positions: Optional[tuple[int, int]] = None) -> BuildReport:
    """Build one trie file from a key stream onto a seekable binary sink."""
    report = BuildReport(counters=counters if counters is not None else IoCounters())
    scratch_root = (Path(cfg.scratch_dir) if cfg.scratch_dir is not None
                    else Path(tempfile.gettempdir()) / "rscas-scratch")
    scratch = _Scratch(scratch_root / f"build-{uuid.uuid4().hex}")
    try:
        root = make_root_partition(keys, cfg, scratch, report.counters, known_positions)
        if root is None:
            raise NoKeysError("cannot build a trie from zero keys")
        report.key_count = root.size
        write_preamble(out, cfg.value_length, root.size)
        end = _build(root, Dimension.VALUE, PREAMBLE_SIZE, out, cfg, scratch,
                     report.counters, report)
        report.file_bytes = end
        return report
    finally:
        scratch.destroy()
