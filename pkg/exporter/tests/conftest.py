import hashlib
import json
import struct

import numpy as np
import pytest
from PIL import Image

HEADER = struct.Struct("<8sIBIQ")
ID_LEN = struct.Struct("<I")


def read_kenyfeat_raw(path):
    """Independent struct-level parse: (modality, dim, ordered {id: vector})."""
    buf = path.read_bytes()
    magic, version, modality, dim, count = HEADER.unpack_from(buf, 0)
    assert magic == b"KENYFEAT"
    assert version == 1
    offset = HEADER.size
    rows = {}
    for _ in range(count):
        (id_len,) = ID_LEN.unpack_from(buf, offset)
        offset += ID_LEN.size
        example_id = buf[offset : offset + id_len].decode("utf-8")
        offset += id_len
        rows[example_id] = np.frombuffer(buf, dtype="<f4", count=dim, offset=offset).copy()
        offset += dim * 4
    assert offset == len(buf), "trailing bytes"
    return modality, dim, rows


def add_media(media_dir, image: Image.Image) -> str:
    """Store a JPEG under media_dir/<hash[:2]>/<hash>; returns the hash."""
    from io import BytesIO

    buf = BytesIO()
    image.save(buf, format="JPEG")
    blob = buf.getvalue()
    digest = hashlib.sha256(blob).hexdigest()
    target = media_dir / digest[:2] / digest
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(blob)
    return digest


def write_manifest(path, classes, examples):
    """examples: (example_id, content_hash, caption, label) tuples."""
    lines = [json.dumps({"dataset_name": "test", "classes": list(classes)})]
    for example_id, content_hash, caption, label in examples:
        lines.append(
            json.dumps(
                {
                    "example_id": example_id,
                    "content_hash": content_hash,
                    "caption": caption,
                    "label": label,
                    "fold": "unassigned",
                }
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def corpus(tmp_path):
    """Four stored JPEGs and a manifest; e1 has an empty caption."""
    media = tmp_path / "media"
    examples = []
    for i in range(4):
        image = Image.new("RGB", (64 + 8 * i, 48), (40 * i, 100, 220 - 30 * i))
        digest = add_media(media, image)
        caption = "" if i == 1 else f"plate {i} #ugali sana"
        examples.append((f"e{i}", digest, caption, i % 2))
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, ["ugali", "mandazi"], examples)
    return manifest, media, examples
