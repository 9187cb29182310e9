"""Writer for the KENYFEAT feature file format.

Layout, all little-endian: 8-byte magic "KENYFEAT", u32 version (1), u8
modality (0 image, 1 text), u32 dim, u64 record count; then per record a
u32 id byte length, the UTF-8 id, and dim float32 values. The fusion side
owns the format; this writer exists so the exporter stays importable without
it, and must stay byte-compatible.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ExportError

MAGIC = b"KENYFEAT"
VERSION = 1
MODALITY_IMAGE = 0
MODALITY_TEXT = 1

_HEADER = struct.Struct("<8sIBIQ")
_ID_LEN = struct.Struct("<I")


def write_kenyfeat(path, modality: int, dim: int, rows) -> None:
    """Write rows, an iterable of (example_id, vector), in the given order."""
    if modality not in (MODALITY_IMAGE, MODALITY_TEXT):
        raise ExportError(f"modality code must be 0 or 1, got {modality}")
    if dim < 1:
        raise ExportError(f"dim must be positive, got {dim}")

    rows = list(rows)
    chunks = [_HEADER.pack(MAGIC, VERSION, modality, dim, len(rows))]
    seen = set()
    for example_id, vec in rows:
        if not example_id:
            raise ExportError("feature row ids must be non-empty")
        if example_id in seen:
            raise ExportError(f"duplicate feature row id {example_id!r}")
        seen.add(example_id)
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise ExportError(f"row {example_id!r} has shape {arr.shape}, expected ({dim},)")
        if not np.all(np.isfinite(arr)):
            raise ExportError(f"row {example_id!r} contains non-finite values")
        encoded = example_id.encode("utf-8")
        chunks.append(_ID_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))
