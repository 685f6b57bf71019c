"""Composite keys and byte-level primitives.

A composite key bundles a hierarchical path, a fixed-width value and an
external reference. Paths are stored with a trailing 0x00 terminator so that
the path component of any key is prefix-free against every other path: no
terminated path can be a strict prefix of another, because 0x00 cannot appear
inside a path. Values all share one fixed width per index, which makes the
value component trivially prefix-free as well.

All positions handed across module boundaries here are 1-based, matching the
convention used throughout the tree layers ("the discriminative byte" is the
first position at which two keys may differ, and position len+1 means "past
the end").
"""

from __future__ import annotations

import enum
import os.path
from dataclasses import dataclass
from typing import Iterable, Sequence

PATH_TERMINATOR = 0x00
MAX_PATH_LENGTH = 255  # terminated length; leaf suffix length fields are one byte
MAX_VALUE_LENGTH = 255
DEFAULT_VALUE_LENGTH = 8
REF_LENGTH = 20


class Dimension(enum.Enum):
    """Key dimension selector. BOTTOM marks "no further split"."""

    PATH = "P"
    VALUE = "V"
    BOTTOM = "_"

    def alternate(self) -> "Dimension":
        if self is Dimension.PATH:
            return Dimension.VALUE
        if self is Dimension.VALUE:
            return Dimension.PATH
        raise ValueError("bottom dimension has no alternate")


class KeyError_(ValueError):
    """Raised for malformed key components. Named to avoid shadowing builtins."""


@dataclass(frozen=True)
class CompositeKey:
    """One (path, value, ref) record.

    path includes the trailing terminator byte. value is the big-endian
    fixed-width encoding. ref is an opaque 20-byte identifier.
    """

    path: bytes
    value: bytes
    ref: bytes

    def component(self, dim: Dimension) -> bytes:
        if dim is Dimension.PATH:
            return self.path
        if dim is Dimension.VALUE:
            return self.value
        raise ValueError("no component for bottom dimension")

    def validate(self, value_length: int) -> None:
        if not self.path or self.path[-1] != PATH_TERMINATOR:
            raise KeyError_("path must end with the terminator byte")
        if PATH_TERMINATOR in self.path[:-1]:
            raise KeyError_("path contains an interior terminator byte")
        if len(self.path) > MAX_PATH_LENGTH:
            raise KeyError_(f"path longer than {MAX_PATH_LENGTH} bytes")
        if len(self.value) != value_length:
            raise KeyError_(
                f"value width {len(self.value)} does not match index width {value_length}"
            )
        if len(self.ref) != REF_LENGTH:
            raise KeyError_(f"ref must be exactly {REF_LENGTH} bytes")


def terminate_path(raw: bytes) -> bytes:
    """Append the 0x00 terminator to a raw path.

    Rejects embedded zero bytes and overlong paths; the terminated result must
    fit the one-byte length fields used by the on-disk leaf format.
    """
    if PATH_TERMINATOR in raw:
        raise KeyError_("raw path may not contain zero bytes")
    if len(raw) + 1 > MAX_PATH_LENGTH:
        raise KeyError_(f"path longer than {MAX_PATH_LENGTH - 1} bytes")
    return raw + bytes([PATH_TERMINATOR])


def encode_value(raw: int, length: int = DEFAULT_VALUE_LENGTH) -> bytes:
    """Encode a non-negative integer as big-endian fixed-width bytes.

    Big-endian fixed width keeps byte order and numeric order identical,
    which the range matching in the query layer relies on.
    """
    if length < 1 or length > MAX_VALUE_LENGTH:
        raise KeyError_(f"value width must be in [1, {MAX_VALUE_LENGTH}]")
    if raw < 0:
        raise KeyError_("value must be non-negative")
    try:
        return raw.to_bytes(length, "big")
    except OverflowError:
        raise KeyError_(f"value {raw} does not fit in {length} bytes") from None


def decode_value(data: bytes) -> int:
    return int.from_bytes(data, "big")


def make_key(raw_path: bytes, value: int | bytes, ref: bytes,
             value_length: int = DEFAULT_VALUE_LENGTH) -> CompositeKey:
    """Build and validate a key from unterminated parts."""
    if isinstance(value, int):
        value = encode_value(value, value_length)
    key = CompositeKey(terminate_path(raw_path), value, ref)
    key.validate(value_length)
    return key


def lcp(keys: Sequence[CompositeKey] | Iterable[CompositeKey], dim: Dimension) -> bytes:
    """Longest common prefix of one dimension across a non-empty key multiset."""
    components = [k.component(dim) for k in keys]
    if not components:
        raise ValueError("lcp of an empty key set is undefined")
    return os.path.commonprefix(components)


def dsc(keys: Sequence[CompositeKey] | Iterable[CompositeKey], dim: Dimension) -> int:
    """Discriminative byte position: 1-based first position where keys may differ.

    Equals len(lcp) + 1. When all keys are identical in the dimension the
    position points one past the end of the (shared) component.
    """
    return len(lcp(keys, dim)) + 1


class RecordError(ValueError):
    """Malformed ingestion record; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


def parse_record(line: str, line_no: int, value_length: int) -> CompositeKey:
    """Parse one tab-separated ingestion record: path, value, ref.

    The value field is either a decimal integer or 0x-prefixed hex with
    exactly two digits per value byte. The ref field is 40 hex characters.
    """
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise RecordError(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
    raw_path, value_text, ref_text = parts
    if not raw_path.startswith("/"):
        raise RecordError(line_no, "path must start with '/'")
    if value_text.startswith("0x") or value_text.startswith("0X"):
        hex_digits = value_text[2:]
        if len(hex_digits) != 2 * value_length:
            raise RecordError(
                line_no,
                f"hex value must have exactly {2 * value_length} digits, got {len(hex_digits)}",
            )
        try:
            value = bytes.fromhex(hex_digits)
        except ValueError:
            raise RecordError(line_no, "invalid hex value") from None
    else:
        try:
            number = int(value_text, 10)
        except ValueError:
            raise RecordError(line_no, f"invalid decimal value {value_text!r}") from None
        try:
            value = encode_value(number, value_length)
        except KeyError_ as exc:
            raise RecordError(line_no, str(exc)) from None
    if len(ref_text) != 2 * REF_LENGTH:
        raise RecordError(line_no, f"ref must be {2 * REF_LENGTH} hex characters")
    try:
        ref = bytes.fromhex(ref_text)
    except ValueError:
        raise RecordError(line_no, "invalid hex ref") from None
    try:
        return make_key(raw_path.encode("utf-8"), value, ref, value_length)
    except KeyError_ as exc:
        raise RecordError(line_no, str(exc)) from None


def format_record(key: CompositeKey) -> str:
    """Inverse of parse_record, used when spooling resident keys to disk."""
    raw_path = key.path[:-1].decode("utf-8")
    return f"{raw_path}\t0x{key.value.hex().upper()}\t{key.ref.hex()}"


def read_records(lines: Iterable[str], value_length: int) -> Iterable[CompositeKey]:
    """Stream keys out of an ingestion file, skipping blank lines."""
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        yield parse_record(line, line_no, value_length)
