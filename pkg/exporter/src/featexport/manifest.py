"""Reader for the dataset manifest JSONL format.

Line 1 is a header object with dataset_name and classes; every further
non-blank line is one example with example_id, content_hash, caption, label.
Extra fields (fold assignments and such) are ignored here: the exporter only
needs identity, media address, and text.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ExportError


@dataclass(frozen=True)
class ManifestExample:
    example_id: str
    content_hash: str
    caption: str
    label: int


@dataclass(frozen=True)
class Manifest:
    dataset_name: str
    classes: tuple
    examples: tuple

    def __len__(self) -> int:
        return len(self.examples)


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot read manifest {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines:
        raise ExportError(f"{path}: empty manifest file")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ExportError(f"{path}:1: bad header: {exc}") from exc
    if not isinstance(header, dict) or "dataset_name" not in header or "classes" not in header:
        raise ExportError(f"{path}:1: header must carry dataset_name and classes")

    examples = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ExportError(f"{path}:{lineno}: bad example line: {exc}") from exc
        try:
            example = ManifestExample(
                example_id=d["example_id"],
                content_hash=d["content_hash"],
                caption=d.get("caption", ""),
                label=d["label"],
            )
        except KeyError as exc:
            raise ExportError(f"{path}:{lineno}: example record missing field {exc}") from exc
        if not example.example_id:
            raise ExportError(f"{path}:{lineno}: empty example_id")
        if example.example_id in seen:
            raise ExportError(f"{path}:{lineno}: duplicate example_id {example.example_id!r}")
        seen.add(example.example_id)
        examples.append(example)

    return Manifest(
        dataset_name=header["dataset_name"],
        classes=tuple(header["classes"]),
        examples=tuple(examples),
    )
