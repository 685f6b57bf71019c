"""Discriminative-byte partitioning and dynamic key interleaving.

The partitioning operator splits a key multiset on the byte each key carries
at the set's discriminative position in one dimension. Because both key
components are prefix-free, either every key has such a byte or the keys are
all identical in that dimension; there is no mixed case. Splitting is order
preserving (byte-wise), prefix preserving, and refines as sets shrink, which
is what lets a trie be read off a recursive application of the operator.

A key's dynamic interleaving cuts its path and value into slices aligned with
the partitioning sequence the key takes through its containing set: each step
contributes the bytes between the previous and the current discriminative
positions of the two dimensions, plus the dimension chosen at that step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core_keys import CompositeKey, Dimension, dsc

# Group label used when a dimension no longer splits (all keys identical in it).
NO_BYTE = -1


@dataclass
class PsiResult:
    """Outcome of one partitioning step.

    groups maps the discriminative byte to the keys carrying it, in ascending
    byte order, each group preserving input arrival order. When the dimension
    is exhausted the single group is keyed NO_BYTE and splits() is False.
    """

    dim: Dimension
    at: int  # 1-based discriminative position used for the split
    groups: dict[int, list[CompositeKey]] = field(default_factory=dict)
    exhausted: bool = False

    def splits(self) -> bool:
        return not self.exhausted


def psi(keys: list[CompositeKey], dim: Dimension) -> PsiResult:
    """Partition keys on the byte at the set's discriminative position in dim."""
    if not keys:
        raise ValueError("cannot partition an empty key set")
    at = dsc(keys, dim)
    first = keys[0].component(dim)
    if at > len(first):
        # Shared prefix covers a whole component; prefix-freeness forces all
        # keys to be identical in this dimension.
        assert all(k.component(dim) == first for k in keys)
        return PsiResult(dim, at, {NO_BYTE: list(keys)}, exhausted=True)
    buckets: dict[int, list[CompositeKey]] = {}
    for k in keys:
        comp = k.component(dim)
        assert at <= len(comp), "prefix-free components cannot end before the split byte"
        buckets.setdefault(comp[at - 1], []).append(k)
    ordered = {b: buckets[b] for b in sorted(buckets)}
    return PsiResult(dim, at, ordered)


def psi_of_key(key: CompositeKey, keys: list[CompositeKey], dim: Dimension) -> list[CompositeKey]:
    """The partition group that contains key (by equality)."""
    result = psi(keys, dim)
    for group in result.groups.values():
        if key in group:
            return group
    raise ValueError("key is not a member of the partitioned set")


@dataclass(frozen=True)
class PartitionStep:
    keys: tuple[CompositeKey, ...]
    dim: Dimension


def partitioning_sequence(key: CompositeKey, keys: list[CompositeKey],
                          start_dim: Dimension = Dimension.VALUE,
                          tau: int = 1) -> list[PartitionStep]:
    """Trace the partition refinement that isolates key down to a tau-sized set.

    Dimensions alternate between steps. A step whose dimension no longer
    splits the current set is skipped in favor of the alternate dimension; if
    neither splits, or the set has shrunk to tau keys or fewer, the trace ends
    with a terminal step carrying the bottom dimension.
    """
    if key not in keys:
        raise ValueError("key is not a member of the set")
    if tau < 1:
        raise ValueError("tau must be at least 1")
    steps: list[PartitionStep] = []
    current = list(keys)
    dim = start_dim
    while True:
        if len(current) <= tau:
            steps.append(PartitionStep(tuple(current), Dimension.BOTTOM))
            return steps
        result = psi(current, dim)
        if result.splits():
            steps.append(PartitionStep(tuple(current), dim))
            for group in result.groups.values():
                if key in group:
                    current = group
                    break
            dim = dim.alternate()
            continue
        other = psi(current, dim.alternate())
        if other.splits():
            dim = dim.alternate()
            continue
        steps.append(PartitionStep(tuple(current), Dimension.BOTTOM))
        return steps


@dataclass(frozen=True)
class InterleavedTuple:
    """One step's slice pair.

    value_first records the presentation order: a step reached from a
    value-dimension split presents its value slice before its path slice.
    Both slices are always stored under their own name, so the flag only
    matters for rendering and for byte-exact comparisons against reference
    layouts.
    """

    s_P: bytes
    s_V: bytes
    dim: Dimension
    value_first: bool


@dataclass(frozen=True)
class InterleavedKey:
    tuples: tuple[InterleavedTuple, ...]
    suffix_P: bytes
    suffix_V: bytes
    ref: bytes

    def reconstruct(self) -> tuple[bytes, bytes]:
        """Reassemble (path, value) from the slices; used as a storage check."""
        path = b"".join(t.s_P for t in self.tuples) + self.suffix_P
        value = b"".join(t.s_V for t in self.tuples) + self.suffix_V
        return path, value


def dynamic_interleave(key: CompositeKey, keys: list[CompositeKey], tau: int = 1) -> InterleavedKey:
    """Interleave key's path and value along its partitioning sequence in keys.

    Slice boundaries are the discriminative positions of the successive sets;
    the bytes of each dimension between the previous and current positions
    form the step's slices. What remains past the terminal set's positions is
    the suffix pair, stored alongside the ref.
    """
    steps = partitioning_sequence(key, keys, Dimension.VALUE, tau)
    tuples: list[InterleavedTuple] = []
    prev_p, prev_v = 1, 1
    prev_dim = Dimension.VALUE
    for step in steps:
        step_keys = list(step.keys)
        cur_p = dsc(step_keys, Dimension.PATH)
        cur_v = dsc(step_keys, Dimension.VALUE)
        tuples.append(InterleavedTuple(
            s_P=key.path[prev_p - 1:cur_p - 1],
            s_V=key.value[prev_v - 1:cur_v - 1],
            dim=step.dim,
            value_first=(prev_dim is Dimension.VALUE),
        ))
        prev_p, prev_v = cur_p, cur_v
        prev_dim = step.dim
    return InterleavedKey(
        tuples=tuple(tuples),
        suffix_P=key.path[prev_p - 1:],
        suffix_V=key.value[prev_v - 1:],
        ref=key.ref,
    )
