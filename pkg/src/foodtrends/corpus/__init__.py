"""Persistent post store and dataset manifest builders."""

from .store import CorpusStore
from .manifest import (
    DatasetManifest,
    LabeledExample,
    ReviewDecisions,
    Decision,
    FOLD_HOLDOUT,
    FOLD_UNASSIGNED,
    load_manifest,
    save_manifest,
    load_decisions,
)
from .builders import (
    Detector,
    build_food_type_manifest,
    bootstrap_binary_manifest,
    assign_splits,
)

__all__ = [
    "CorpusStore",
    "DatasetManifest",
    "LabeledExample",
    "ReviewDecisions",
    "Decision",
    "FOLD_HOLDOUT",
    "FOLD_UNASSIGNED",
    "load_manifest",
    "save_manifest",
    "load_decisions",
    "Detector",
    "build_food_type_manifest",
    "bootstrap_binary_manifest",
    "assign_splits",
]
