"""Feature tables and the KENYFEAT binary file format.

The format is the boundary between this package and external feature
exporters, so it is pinned to the byte: little-endian, magic "KENYFEAT",
u32 version (1), u8 modality (0 image, 1 text), u32 dim, u64 record count,
then per record a u32 id length, the UTF-8 id, and dim float32 values.
No padding anywhere. Values are stored 32-bit; training upcasts to 64-bit.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ValidationError
from ..seeds import derive_seed

MAGIC = b"KENYFEAT"
VERSION = 1
_HEADER = struct.Struct("<8sIBIQ")  # magic, version, modality, dim, record_count
_ID_LEN = struct.Struct("<I")


class Modality(enum.Enum):
    IMAGE = 0
    TEXT = 1

    @classmethod
    def from_wire(cls, code: int) -> "Modality":
        try:
            return cls(code)
        except ValueError:
            raise FormatError(f"unknown modality code {code}") from None


@dataclass
class FeatureTable:
    """Per-example feature vectors of one modality, all the same width."""

    modality: Modality
    dim: int
    rows: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("feature dim must be positive")
        normalized = {}
        for example_id, vec in self.rows.items():
            if not example_id:
                raise ValidationError("feature row ids must be non-empty")
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise ValidationError(
                    f"row {example_id!r} has shape {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"row {example_id!r} contains non-finite values")
            normalized[example_id] = arr
        self.rows = normalized

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, example_id: str):
        return self.rows.get(example_id)

    def ids(self):
        return list(self.rows)


def write_feature_file(table: FeatureTable, path) -> None:
    """Serialize a table; row order follows the table's insertion order."""
    path = Path(path)
    chunks = [_HEADER.pack(MAGIC, VERSION, table.modality.value, table.dim, len(table.rows))]
    for example_id, vec in table.rows.items():
        encoded = example_id.encode("utf-8")
        chunks.append(_ID_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(vec.astype("<f4", copy=False).tobytes())
    path.write_bytes(b"".join(chunks))


def read_feature_file(path) -> FeatureTable:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read feature file {path}: {exc}") from exc
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(buf)} (need {_HEADER.size})")
    magic, version, modality_code, dim, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    modality = Modality.from_wire(modality_code)
    if dim < 1:
        raise FormatError(f"{path}: dim must be positive, got {dim}")

    offset = _HEADER.size
    row_bytes = dim * 4
    rows: dict[str, np.ndarray] = {}
    for i in range(count):
        if offset + _ID_LEN.size > len(buf):
            raise FormatError(f"{path}: truncated at byte {offset} reading id length of record {i}")
        (id_len,) = _ID_LEN.unpack_from(buf, offset)
        offset += _ID_LEN.size
        if offset + id_len > len(buf):
            raise FormatError(f"{path}: truncated at byte {offset} reading id of record {i}")
        try:
            example_id = buf[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: record {i} id is not valid UTF-8: {exc}") from exc
        offset += id_len
        if offset + row_bytes > len(buf):
            raise FormatError(f"{path}: truncated at byte {offset} reading values of record {i}")
        vec = np.frombuffer(buf, dtype="<f4", count=dim, offset=offset).copy()
        offset += row_bytes
        if example_id in rows:
            raise FormatError(f"{path}: duplicate id {example_id!r} at record {i}")
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: record {i} ({example_id!r}) has non-finite values")
        rows[example_id] = vec
    if offset != len(buf):
        raise FormatError(f"{path}: {len(buf) - offset} trailing bytes after {count} records")
    return FeatureTable(modality=modality, dim=dim, rows=rows)


def stub_feature_table(ids, modality: Modality, dim: int, seed: int) -> FeatureTable:
    """Deterministic unit-scale stand-in features, derived per id.

    Each row depends only on (seed, modality, id), never on list order, so
    tables built from different id subsets agree on shared ids.
    """
    rows = {}
    for example_id in ids:
        rng = np.random.default_rng(derive_seed(seed, "stub", modality.name, example_id))
        rows[example_id] = rng.standard_normal(dim, dtype=np.float32)
    return FeatureTable(modality=modality, dim=dim, rows=rows)


def zero_filled_table(ids, modality: Modality, dim: int) -> FeatureTable:
    """All-zero rows; used to ablate one modality out of a trained setup."""
    zero = np.zeros(dim, dtype=np.float32)
    return FeatureTable(modality=modality, dim=dim, rows={i: zero.copy() for i in ids})
