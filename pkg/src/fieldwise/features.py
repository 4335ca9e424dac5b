"""Text example parsing into hashed, field-tagged feature vectors.

Line grammar (one example per line, UTF-8):

    label ws '|' field_name (ws token[':' value])* (ws '|' field_name ...)*

``label`` is ``0``, ``1``, or ``-1`` (normalized to 0). A token without an
explicit value carries 1.0 (categorical indicator convention). Fields
flagged numeric in the schema pass their values through
:func:`transform_numeric` before emission. Tokens of the form ``@<digits>``
are pre-hashed feature indices (emitted by :func:`serialize_example`) and
skip both hashing and the numeric transform.

Schema file format (line-oriented text):

    field <name> [numeric]
    hash_bits <n>

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .hashing import MAX_HASH_BITS, MIN_HASH_BITS, hash_feature


def transform_numeric(v: float) -> float:
    """Log-compress positive continuous values; leave the rest untouched.

    ln(1+v) for v > 0 keeps the transform finite at 0 and sign-safe for
    the occasional negative counter.
    """
    return math.log1p(v) if v > 0 else v


@dataclass(frozen=True)
class InputSchema:
    """Ordered field list plus parsing options; fixed for a model's lifetime.

    Changing ``hash_bits`` invalidates every weight keyed by the old index
    space, so it is part of the schema, not a per-run knob.
    """

    field_names: tuple[str, ...]
    numeric_fields: frozenset[str] = frozenset()
    hash_bits: int = 18

    def __post_init__(self):
        if not self.field_names:
            raise ParseError("schema declares no fields")
        if len(set(self.field_names)) != len(self.field_names):
            raise ParseError("schema field names must be unique")
        if not MIN_HASH_BITS <= self.hash_bits <= MAX_HASH_BITS:
            raise ParseError(
                f"hash_bits must be in [{MIN_HASH_BITS}, {MAX_HASH_BITS}],"
                f" got {self.hash_bits}"
            )
        unknown = self.numeric_fields - set(self.field_names)
        if unknown:
            raise ParseError(f"numeric flag on undeclared fields: {sorted(unknown)}")
        object.__setattr__(
            self, "_field_ids", {name: i for i, name in enumerate(self.field_names)}
        )

    @property
    def n_fields(self) -> int:
        return len(self.field_names)

    def field_id(self, name: str) -> int:
        try:
            return self._field_ids[name]
        except KeyError:
            raise ParseError(f"unknown field name: {name!r}") from None

    @classmethod
    def from_text(cls, text: str) -> "InputSchema":
        names: list[str] = []
        numeric: set[str] = set()
        hash_bits = 18
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "field" and len(parts) in (2, 3):
                if len(parts) == 3 and parts[2] != "numeric":
                    raise ParseError(f"schema line {lineno}: unknown flag {parts[2]!r}")
                names.append(parts[1])
                if len(parts) == 3:
                    numeric.add(parts[1])
            elif parts[0] == "hash_bits" and len(parts) == 2:
                try:
                    hash_bits = int(parts[1])
                except ValueError:
                    raise ParseError(
                        f"schema line {lineno}: hash_bits wants an integer"
                    ) from None
            else:
                raise ParseError(f"schema line {lineno}: cannot parse {raw!r}")
        return cls(tuple(names), frozenset(numeric), hash_bits)

    @classmethod
    def load(cls, path) -> "InputSchema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [f"hash_bits {self.hash_bits}"]
        for name in self.field_names:
            suffix = " numeric" if name in self.numeric_fields else ""
            lines.append(f"field {name}{suffix}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FieldFeatures:
    """Features of one field: sorted unique hashed indices and their values."""

    field_id: int
    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, finite

    def __post_init__(self):
        self.indices.flags.writeable = False
        self.values.flags.writeable = False

    def __eq__(self, other):
        return (
            isinstance(other, FieldFeatures)
            and self.field_id == other.field_id
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ParsedExample:
    """One labeled instance: binary label plus per-field hashed features."""

    label: int
    fields: tuple[FieldFeatures, ...]

    def __eq__(self, other):
        return (
            isinstance(other, ParsedExample)
            and self.label == other.label
            and self.fields == other.fields
        )


_EMPTY_IDX = np.empty(0, dtype=np.int64)
_EMPTY_VAL = np.empty(0, dtype=np.float64)
_EMPTY_IDX.flags.writeable = False
_EMPTY_VAL.flags.writeable = False


def _make_field(field_id: int, feats: dict[int, float]) -> FieldFeatures:
    if not feats:
        return FieldFeatures(field_id, _EMPTY_IDX, _EMPTY_VAL)
    items = sorted(feats.items())
    idx = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
    val = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
    return FieldFeatures(field_id, idx, val)


def _parse_blocks(segments, schema: InputSchema) -> tuple[FieldFeatures, ...]:
    """Turn '|'-split field block segments into canonical FieldFeatures.

    Duplicate field blocks are merged, and features hashing to the same
    index within a field have their values summed — the model is linear in
    per-index values, so this is exact and makes the result canonical.
    """
    max_index = 1 << schema.hash_bits
    per_field: dict[int, dict[int, float]] = {}
    order: list[int] = []
    for seg in segments:
        atoms = seg.split()
        if not atoms:
            raise ParseError("empty field block (missing field name after '|')")
        name = atoms[0]
        fid = schema.field_id(name)
        numeric = name in schema.numeric_fields
        if fid not in per_field:
            per_field[fid] = {}
            order.append(fid)
        feats = per_field[fid]
        for atom in atoms[1:]:
            token, sep, raw_value = atom.partition(":")
            if sep:
                try:
                    value = float(raw_value)
                except ValueError:
                    raise ParseError(
                        f"bad value {raw_value!r} for token {token!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(f"non-finite value for token {token!r}")
            else:
                value = 1.0
            if token.startswith("@") and token[1:].isdigit():
                index = int(token[1:])
                if index >= max_index:
                    raise ParseError(
                        f"raw index {index} out of range for hash_bits={schema.hash_bits}"
                    )
            else:
                index = hash_feature(name, token, schema.hash_bits)
                if numeric:
                    value = transform_numeric(value)
            feats[index] = feats.get(index, 0.0) + value
    return tuple(_make_field(f, per_field[f]) for f in order)


def parse_example(line: str, schema: InputSchema) -> ParsedExample:
    """Parse one text example (label plus field blocks)."""
    segments = line.split("|")
    head = segments[0].strip()
    if head == "1":
        label = 1
    elif head in ("0", "-1"):
        label = 0
    else:
        raise ParseError(f"malformed label {head!r} (want 0, 1, or -1)")
    if len(segments) < 2:
        raise ParseError("example has no field blocks")
    return ParsedExample(label, _parse_blocks(segments[1:], schema))


def parse_field_blocks(text: str, schema: InputSchema) -> tuple[FieldFeatures, ...]:
    """Parse a label-less '|field ...' string (scoring request lines).

    A lone ``|`` denotes an empty field set (candidate with no features of
    its own).
    """
    stripped = text.strip()
    if not stripped.startswith("|"):
        raise ParseError("field blocks must start with '|'")
    if stripped == "|":
        return ()
    return _parse_blocks(stripped.split("|")[1:], schema)


def serialize_example(example: ParsedExample, schema: InputSchema) -> str:
    """Debug serializer; its output re-parses to an identical ParsedExample.

    Indices are emitted in raw ``@<index>`` form because hashing is not
    invertible; values are repr-exact.
    """
    parts = [str(example.label)]
    for ff in example.fields:
        block = [f"|{schema.field_names[ff.field_id]}"]
        for i, v in zip(ff.indices, ff.values):
            block.append(f"@{int(i)}:{float(v)!r}")
        parts.append(" ".join(block))
    return " ".join(parts)
