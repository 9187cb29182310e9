"""Stable seed derivation.

All randomness in the pipeline flows from one root seed; each stage derives
its own seed by hashing (root, stage labels...) so stages stay independent
and reproducible regardless of execution order.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *labels: object) -> int:
    """Derive a 64-bit seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root) & _MASK64).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
