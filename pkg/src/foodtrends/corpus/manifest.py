"""Dataset manifests: labeled examples, class lists, and fold assignments.

The on-disk form is JSON lines: a header object carrying dataset_name,
classes, and (once splits are assigned) seed, followed by one example per
line. This file is the contract between dataset builders, trainers, and the
feature exporter, so loading is strict: malformed lines raise FormatError
with the offending line number rather than being skipped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import FormatError, ValidationError

FOLD_HOLDOUT = "HOLDOUT"
FOLD_UNASSIGNED = "UNASSIGNED"
N_FOLDS = 5

DECISION_ACCEPT = "accept"
DECISION_REJECT = "reject"
DECISION_RELABEL = "relabel"


@dataclass(frozen=True)
class LabeledExample:
    example_id: str
    content_hash: str
    caption: str
    label: int
    fold: int | str = FOLD_UNASSIGNED

    def __post_init__(self):
        if not self.example_id:
            raise ValidationError("example_id must be non-empty")
        if not self.content_hash:
            raise ValidationError(f"{self.example_id}: content_hash must be non-empty")
        if not isinstance(self.label, int) or isinstance(self.label, bool) or self.label < 0:
            raise ValidationError(f"{self.example_id}: label must be a class index >= 0")
        if isinstance(self.fold, bool) or not (
            (isinstance(self.fold, int) and 0 <= self.fold < N_FOLDS)
            or self.fold in (FOLD_HOLDOUT, FOLD_UNASSIGNED)
        ):
            raise ValidationError(f"{self.example_id}: fold must be 0..4, HOLDOUT, or UNASSIGNED")

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "content_hash": self.content_hash,
            "caption": self.caption,
            "label": self.label,
            "fold": self.fold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledExample":
        try:
            return cls(
                example_id=d["example_id"],
                content_hash=d["content_hash"],
                caption=d.get("caption", ""),
                label=d["label"],
                fold=d.get("fold", FOLD_UNASSIGNED),
            )
        except KeyError as exc:
            raise FormatError(f"example record missing field {exc}") from exc


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    classes: tuple[str, ...]
    examples: tuple[LabeledExample, ...] = ()
    split_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.dataset_name:
            raise ValidationError("dataset_name must be non-empty")
        if not self.classes:
            raise ValidationError("classes must be non-empty")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("class names must be unique")
        seen: set[str] = set()
        for ex in self.examples:
            if ex.label >= len(self.classes):
                raise ValidationError(
                    f"{ex.example_id}: label {ex.label} out of range for {len(self.classes)} classes"
                )
            if ex.example_id in seen:
                raise ValidationError(f"duplicate example_id {ex.example_id!r}")
            seen.add(ex.example_id)

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.classes}
        for ex in self.examples:
            counts[self.classes[ex.label]] += 1
        return counts

    def by_class(self) -> dict[int, list[LabeledExample]]:
        groups: dict[int, list[LabeledExample]] = {i: [] for i in range(len(self.classes))}
        for ex in self.examples:
            groups[ex.label].append(ex)
        return groups

    def with_examples(self, examples, split_seed=None) -> "DatasetManifest":
        return replace(self, examples=tuple(examples), split_seed=split_seed)


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    header = {"dataset_name": manifest.dataset_name, "classes": list(manifest.classes)}
    if manifest.split_seed is not None:
        header["seed"] = manifest.split_seed
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(ex.to_dict(), sort_keys=True) for ex in manifest.examples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: bad header: {exc}") from exc
    if not isinstance(header, dict) or "dataset_name" not in header or "classes" not in header:
        raise FormatError(f"{path}:1: header must carry dataset_name and classes")
    examples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad example line: {exc}") from exc
        try:
            examples.append(LabeledExample.from_dict(d))
        except (FormatError, ValidationError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    try:
        return DatasetManifest(
            dataset_name=header["dataset_name"],
            classes=tuple(header["classes"]),
            examples=tuple(examples),
            split_seed=header.get("seed"),
        )
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class Decision:
    action: str
    new_label: str | None = None

    def __post_init__(self):
        if self.action not in (DECISION_ACCEPT, DECISION_REJECT, DECISION_RELABEL):
            raise ValidationError(f"unknown decision action {self.action!r}")
        if self.action == DECISION_RELABEL and not self.new_label:
            raise ValidationError("relabel decision requires a new_label")
        if self.action != DECISION_RELABEL and self.new_label is not None:
            raise ValidationError(f"{self.action} decision must not carry a new_label")


@dataclass(frozen=True)
class ReviewDecisions:
    by_example: dict = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "ReviewDecisions":
        return cls({})

    def get(self, example_id: str) -> Decision | None:
        return self.by_example.get(example_id)

    def __len__(self) -> int:
        return len(self.by_example)


def load_decisions(path) -> ReviewDecisions:
    """Read a decisions CSV: example_id,decision[,new_label] per row."""
    path = Path(path)
    by_example: dict[str, Decision] = {}
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) not in (2, 3):
                    raise FormatError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(row)}")
                example_id = row[0].strip()
                action = row[1].strip()
                new_label = row[2].strip() if len(row) == 3 and row[2].strip() else None
                if example_id in by_example:
                    raise FormatError(f"{path}:{lineno}: duplicate decision for {example_id!r}")
                try:
                    by_example[example_id] = Decision(action=action, new_label=new_label)
                except ValidationError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise FormatError(f"cannot read decisions {path}: {exc}") from exc
    return ReviewDecisions(by_example)
