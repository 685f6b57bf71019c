"""Log-structured index: one mutable trie in memory, immutable tries on disk.

Disk tries occupy numbered slots. Slot 0 holds at most M keys (the memory
budget); slot i holds between 2^(i-1)*M exclusive and 2^i*M inclusive. When
the mutable trie reaches M keys it overflows: the smallest empty slot i is
chosen, the mutable keys and the tries in slots 0..i-1 (all occupied, by
minimality) are merged by one bulk load into a fresh trie for slot i, and the
consumed tries are deleted. Every key therefore moves through a geometric
cascade, and at most one trie per slot exists at any time.

The merge computes the union's discriminative positions directly from the
source tries' root slices (each root slice is exactly its trie's common
prefix in that dimension), so the bulk load skips its per-key first-pass
refinement.

Index directory layout: `config.json` (build parameters), `MANIFEST` (one
line per disk trie: level, filename, key count; rewritten atomically),
`r<level>-<generation>.rscas` trie files, `m0.keys` (the mutable trie's keys,
ingestion format, rewritten on save so sessions can resume), and `scratch/`
for partition spill files.

Merges run synchronously by default. With background_merge enabled the
mutable trie is frozen and swapped out, the merge runs on a worker thread,
and queries keep seeing the frozen snapshot plus the old manifest until the
swap; an overflow arriving while a merge is still in flight is an error
rather than a queue.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from . import costmodel
from .bulkload import BuildConfig, BuildReport, IoCounters, bulk_load_trie
from .core_keys import CompositeKey, read_records, format_record
from .disk_trie import TrieFile
from .mem_trie import MemTrie
from .query import CasQuery, cas_query

MANIFEST_NAME = "MANIFEST"
CONFIG_NAME = "config.json"
SIDECAR_NAME = "m0.keys"
_TRIE_RE = re.compile(r"^r(\d+)-(\d+)\.rscas$")


class IndexBusyError(RuntimeError):
    """An overflow fired while a background merge is still running."""


@dataclass
class LsmConfig:
    memory_keys: int = 1_000_000
    tau: int = 100
    page_size: int = 16384
    value_length: int = 8
    background_merge: bool = False
    page_capacity_keys: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps({
            "memory_keys": self.memory_keys,
            "tau": self.tau,
            "page_size": self.page_size,
            "value_length": self.value_length,
            "background_merge": self.background_merge,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LsmConfig":
        data = json.loads(text)
        return cls(
            memory_keys=data["memory_keys"],
            tau=data["tau"],
            page_size=data["page_size"],
            value_length=data["value_length"],
            background_merge=data.get("background_merge", False),
        )


@dataclass
class Slot:
    level: int
    filename: str
    key_count: int
    handle: Optional[TrieFile] = field(default=None, repr=False, compare=False)


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class LsmIndex:
    def __init__(self, directory: Path, config: LsmConfig, slots: list[Slot], mem: MemTrie):
        self.directory = Path(directory)
        self.config = config
        self.slots = slots  # ascending level order
        self.mem = mem
        self.io = IoCounters()
        self.merge_log: list[tuple[int, int]] = []  # (target level, merged key count)
        self._lock = threading.Lock()
        self._frozen: Optional[MemTrie] = None
        self._merge_thread: Optional[threading.Thread] = None
        self._merge_error: Optional[BaseException] = None

    @classmethod
    def create(cls, directory, config: LsmConfig) -> "LsmIndex":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / CONFIG_NAME).exists():
            raise FileExistsError(f"index already present in {directory}")
        _atomic_write(directory / CONFIG_NAME, config.to_json())
        _atomic_write(directory / MANIFEST_NAME, "")
        return cls(directory, config, [], MemTrie(config.value_length))

    @classmethod
    def open(cls, directory) -> "LsmIndex":
        directory = Path(directory)
        config_path = directory / CONFIG_NAME
        if not config_path.exists():
            raise FileNotFoundError(f"no index in {directory} (missing {CONFIG_NAME})")
        config = LsmConfig.from_json(config_path.read_text(encoding="utf-8"))
        slots: list[Slot] = []
        manifest = directory / MANIFEST_NAME
        if manifest.exists():
            for line in manifest.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                level_s, filename, count_s = line.split("\t")
                if not (directory / filename).exists():
                    raise FileNotFoundError(f"manifest references missing trie {filename}")
                slots.append(Slot(int(level_s), filename, int(count_s)))
        slots.sort(key=lambda s: s.level)
        mem = MemTrie(config.value_length)
        sidecar = directory / SIDECAR_NAME
        if sidecar.exists():
            with open(sidecar, "r", encoding="utf-8") as f:
                for key in read_records(f, config.value_length):
                    mem.insert(key)
        index = cls(directory, config, slots, mem)
        if mem.key_count >= config.memory_keys:
            # The memory budget shrank below the resident keys; spill now.
            index.handle_overflow()
        return index

    # -- write path ---------------------------------------------------------

    def bulk_build(self, keys) -> BuildReport:
        """One-shot load of an empty index; the trie lands in the slot its size demands."""
        if self.slots or self.mem.key_count:
            raise ValueError("bulk build requires an empty index")
        cfg = BuildConfig(
            tau=self.config.tau, memory_keys=self.config.memory_keys,
            page_size=self.config.page_size, value_length=self.config.value_length,
            scratch_dir=self.directory / "scratch",
            page_capacity_keys=self.config.page_capacity_keys,
        )
        tmp_path = self.directory / ".bulk.tmp"
        try:
            with open(tmp_path, "w+b") as out:
                report = bulk_load_trie(keys, out, cfg, counters=self.io)
                out.flush()
                os.fsync(out.fileno())
            level, capacity = 0, self.config.memory_keys
            while report.key_count > capacity:
                level += 1
                capacity *= 2
            filename = self._next_filename(level)
            os.replace(tmp_path, self.directory / filename)
        finally:
            tmp_path.unlink(missing_ok=True)
        with self._lock:
            self.slots = [Slot(level, filename, report.key_count)]
            self._write_manifest()
        return report

    def insert(self, key: CompositeKey) -> None:
        key.validate(self.config.value_length)
        with self._lock:
            self.mem.insert(key)
            full = self.mem.key_count >= self.config.memory_keys
        if full:
            self.handle_overflow()

    def handle_overflow(self) -> None:
        """Merge the mutable trie (and the slots below the first gap) to disk."""
        with self._lock:
            if self._frozen is not None:
                raise IndexBusyError("a background merge is still running")
            if self.mem.key_count == 0:
                return
            snapshot = self.mem
            self.mem = MemTrie(self.config.value_length)
            if self.config.background_merge:
                self._frozen = snapshot
                self._merge_thread = threading.Thread(
                    target=self._merge_entry, args=(snapshot,), daemon=True)
                self._merge_thread.start()
                return
        self._merge(snapshot)

    def _merge_entry(self, snapshot: MemTrie) -> None:
        try:
            self._merge(snapshot)
        except BaseException as exc:  # surfaced on the next synchronization point
            self._merge_error = exc
        finally:
            with self._lock:
                self._frozen = None

    def _merge(self, snapshot: MemTrie) -> None:
        try:
            self._run_merge(snapshot)
        except BaseException:
            # Nothing was swapped in; put the frozen keys back so they survive.
            with self._lock:
                for key in snapshot.iterate_keys():
                    self.mem.insert(key)
            raise

    def _run_merge(self, snapshot: MemTrie) -> None:
        with self._lock:
            occupied = {s.level for s in self.slots}
            # Smallest empty slot whose range admits the merged total. Steady
            # state always fits the first gap; escalation only happens when a
            # shrunken memory budget forces an oversized flush on open.
            target = 0
            while True:
                if target not in occupied:
                    victims = [s for s in self.slots if s.level < target]
                    total = snapshot.key_count + sum(s.key_count for s in victims)
                    if total <= self.config.memory_keys << target:
                        break
                target += 1
            regular = all(i in occupied for i in range(target))
        victim_files = [TrieFile.open(self.directory / s.filename) for s in victims]
        filename = self._next_filename(target)
        tmp_path = self.directory / f".{filename}.tmp"
        try:
            g_p, g_v = self._union_positions(snapshot, victim_files)

            def stream() -> Iterator[CompositeKey]:
                yield from snapshot.iterate_keys()
                for tf in victim_files:
                    yield from tf.iterate_keys()

            cfg = BuildConfig(
                tau=self.config.tau, memory_keys=self.config.memory_keys,
                page_size=self.config.page_size, value_length=self.config.value_length,
                scratch_dir=self.directory / "scratch",
                page_capacity_keys=self.config.page_capacity_keys,
            )
            with open(tmp_path, "w+b") as out:
                report = bulk_load_trie(stream(), out, cfg, counters=self.io,
                                        known_positions=(g_p, g_v))
                out.flush()
                os.fsync(out.fileno())
            assert report.key_count == total
            os.replace(tmp_path, self.directory / filename)
        finally:
            tmp_path.unlink(missing_ok=True)
            for tf in victim_files:
                tf.close()
        if target >= 1 and regular:
            low, high = (1 << (target - 1)) * self.config.memory_keys, \
                (1 << target) * self.config.memory_keys
            assert low < total <= high, f"slot {target} count {total} outside ({low}, {high}]"
        else:
            assert total <= self.config.memory_keys << target
        with self._lock:
            for s in victims:
                if s.handle is not None:
                    s.handle.close()
            self.slots = [s for s in self.slots if s.level >= target]
            self.slots.append(Slot(target, filename, total))
            self.slots.sort(key=lambda s: s.level)
            self._write_manifest()
            self.merge_log.append((target, total))
        for s in victims:
            (self.directory / s.filename).unlink(missing_ok=True)

    @staticmethod
    def _union_positions(snapshot: MemTrie, victim_files: list[TrieFile]) -> tuple[int, int]:
        """Discriminative positions of the merge union, from root slices alone.

        Every source root's slice pair is exactly that trie's per-dimension
        common prefix, so folding pairwise common prefixes over the roots
        gives the union's positions without touching any keys.
        """
        root = snapshot.root
        assert root is not None
        g_p, g_v = len(root.s_P) + 1, len(root.s_V) + 1
        for tf in victim_files:
            other = tf.root()
            limit = min(g_p - 1, len(other.s_P))
            j = 0
            while j < limit and root.s_P[j] == other.s_P[j]:
                j += 1
            g_p = j + 1
            limit = min(g_v - 1, len(other.s_V))
            j = 0
            while j < limit and root.s_V[j] == other.s_V[j]:
                j += 1
            g_v = j + 1
        return g_p, g_v

    def _next_filename(self, level: int) -> str:
        generation = 0
        for name in os.listdir(self.directory):
            m = _TRIE_RE.match(name)
            if m:
                generation = max(generation, int(m.group(2)))
        return f"r{level}-{generation + 1}.rscas"

    def _write_manifest(self) -> None:
        lines = [f"{s.level}\t{s.filename}\t{s.key_count}" for s in self.slots]
        _atomic_write(self.directory / MANIFEST_NAME, "".join(line + "\n" for line in lines))

    def _check_merge_error(self) -> None:
        if self._merge_error is not None:
            exc, self._merge_error = self._merge_error, None
            raise exc

    def wait_for_merge(self) -> None:
        thread = self._merge_thread
        if thread is not None:
            thread.join()
            self._merge_thread = None
        self._check_merge_error()

    # -- read path ----------------------------------------------------------

    def _slot_handle(self, slot: Slot) -> TrieFile:
        if slot.handle is None:
            slot.handle = TrieFile.open(self.directory / slot.filename)
        return slot.handle

    def query(self, q: CasQuery) -> list[bytes]:
        """Refs matching q, mutable trie first, then slots by ascending level."""
        self._check_merge_error()
        with self._lock:
            tries = [self.mem.root]
            if self._frozen is not None:
                tries.append(self._frozen.root)
            slots = list(self.slots)
        results: list[bytes] = []
        for root in tries:
            results.extend(cas_query(root, q))
        for slot in slots:
            results.extend(cas_query(self._slot_handle(slot).root(), q))
        return results

    def iterate_keys(self) -> Iterator[CompositeKey]:
        self._check_merge_error()
        with self._lock:
            mems = [self.mem] + ([self._frozen] if self._frozen is not None else [])
            slots = list(self.slots)
        for mem in mems:
            yield from mem.iterate_keys()
        for slot in slots:
            yield from self._slot_handle(slot).iterate_keys()

    @property
    def key_count(self) -> int:
        frozen = self._frozen.key_count if self._frozen is not None else 0
        return self.mem.key_count + frozen + sum(s.key_count for s in self.slots)

    # -- persistence --------------------------------------------------------

    def save(self) -> None:
        """Persist the mutable trie's keys so a later open resumes exactly here."""
        self.wait_for_merge()
        lines = [format_record(k) for k in self.mem.iterate_keys()]
        _atomic_write(self.directory / SIDECAR_NAME, "".join(l + "\n" for l in lines))

    def close(self) -> None:
        self.save()
        for slot in self.slots:
            if slot.handle is not None:
                slot.handle.close()
                slot.handle = None

    def __enter__(self) -> "LsmIndex":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# -- statistics -------------------------------------------------------------


@dataclass
class TrieStats:
    name: str
    key_count: int
    node_count: int
    leaf_count: int
    max_depth: int
    depth_histogram: dict[int, int]
    fanout_histogram: dict[int, int]
    avg_fanout: float
    avg_leaf_depth: float
    expected_depth: float


@dataclass
class IndexStats:
    total_keys: int
    tries: list[TrieStats]


def _walk_stats(root, name: str, key_count: int, tau: int) -> TrieStats:
    depth_hist: dict[int, int] = {}
    fanout_hist: dict[int, int] = {}
    leaf_count = 0
    leaf_depth_sum = 0

    def walk(view, depth: int) -> None:
        nonlocal leaf_count, leaf_depth_sum
        depth_hist[depth] = depth_hist.get(depth, 0) + 1
        if view.is_leaf:
            leaf_count += 1
            leaf_depth_sum += depth
            return
        fanout = 0
        for _, child in view.children():
            fanout += 1
            walk(child, depth + 1)
        fanout_hist[fanout] = fanout_hist.get(fanout, 0) + 1

    if root is not None:
        walk(root, 1)
    node_count = sum(depth_hist.values())
    inner_count = node_count - leaf_count
    total_fanout = sum(f * c for f, c in fanout_hist.items())
    avg_fanout = total_fanout / inner_count if inner_count else 0.0
    expected = costmodel.expected_depth(avg_fanout, key_count, tau) if key_count else 0.0
    return TrieStats(
        name=name,
        key_count=key_count,
        node_count=node_count,
        leaf_count=leaf_count,
        max_depth=max(depth_hist) if depth_hist else 0,
        depth_histogram=dict(sorted(depth_hist.items())),
        fanout_histogram=dict(sorted(fanout_hist.items())),
        avg_fanout=avg_fanout,
        avg_leaf_depth=leaf_depth_sum / leaf_count if leaf_count else 0.0,
        expected_depth=expected,
    )


def stats(index: LsmIndex) -> IndexStats:
    index.wait_for_merge()
    tries = [_walk_stats(index.mem.root, "memory", index.mem.key_count, index.config.tau)]
    for slot in index.slots:
        handle = index._slot_handle(slot)
        tries.append(_walk_stats(handle.root(), slot.filename, slot.key_count,
                                 index.config.tau))
    return IndexStats(total_keys=index.key_count, tries=tries)


def lsm_insert(index: LsmIndex, key: CompositeKey) -> None:
    index.insert(key)


def lsm_query(index: LsmIndex, q: CasQuery) -> list[bytes]:
    return index.query(q)
