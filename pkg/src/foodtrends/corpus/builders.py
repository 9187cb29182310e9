"""Builders that turn harvested posts into labeled dataset manifests.

Candidate labels come from caption keyword matches; posts matching several
food names are ambiguous and excluded unless a relabel decision reinstates a
specific image. Review decisions are a file input so the manual-inspection
steps are reproducible instead of interactive.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ShortfallError, ValidationError
from ..fusion.features import FeatureTable
from ..fusion.head import FusionHeadParams, forward
from ..seeds import derive_seed
from ..text import KeywordList, match_keywords, normalize
from .manifest import (
    DECISION_REJECT,
    DECISION_RELABEL,
    FOLD_HOLDOUT,
    N_FOLDS,
    DatasetManifest,
    LabeledExample,
    ReviewDecisions,
)
from .store import CorpusStore

BINARY_CLASSES = ("food", "nonfood")


def _image_candidates(store: CorpusStore):
    """Yield (example_id, content_hash, caption, post) per fetched image."""
    for post in store.records():
        caption = post.caption or ""
        for idx, ref in enumerate(post.image_refs):
            if ref.content_hash is None:
                continue
            yield f"{post.primary_key}:{idx}", ref.content_hash, caption, post


def build_food_type_manifest(
    store: CorpusStore,
    keywords: KeywordList,
    min_class_size: int,
    decisions: ReviewDecisions | None = None,
    *,
    dataset_name: str = "food-types",
) -> DatasetManifest:
    """Label each fetched image by the single food name its caption matches.

    Reject decisions drop individual images; relabel decisions force a label,
    which also reinstates images from ambiguous or unmatched posts. Classes
    that end up below min_class_size are dropped along with their examples.
    """
    if min_class_size < 1:
        raise ValidationError("min_class_size must be >= 1")
    decisions = decisions if decisions is not None else ReviewDecisions.empty()
    valid_names = set(keywords.names)

    matched_cache: dict[str, frozenset] = {}
    labeled: list[tuple[str, str, str, str]] = []  # (label name, example_id, hash, caption)
    for example_id, content_hash, caption, post in _image_candidates(store):
        decision = decisions.get(example_id)
        if decision is not None and decision.action == DECISION_REJECT:
            continue
        if decision is not None and decision.action == DECISION_RELABEL:
            if decision.new_label not in valid_names:
                raise ValidationError(
                    f"{example_id}: relabel target {decision.new_label!r} is not a known food name"
                )
            labeled.append((decision.new_label, example_id, content_hash, caption))
            continue
        if post.primary_key not in matched_cache:
            matched_cache[post.primary_key] = frozenset(match_keywords(normalize(caption), keywords))
        matched = matched_cache[post.primary_key]
        if len(matched) != 1:
            continue
        labeled.append((next(iter(matched)), example_id, content_hash, caption))

    by_name: dict[str, list] = {}
    for name, example_id, content_hash, caption in labeled:
        by_name.setdefault(name, []).append((example_id, content_hash, caption))
    surviving = [n for n in keywords.names if len(by_name.get(n, ())) >= min_class_size]
    if not surviving:
        raise ValidationError("no classes met threshold")

    index_of = {name: i for i, name in enumerate(surviving)}
    examples = [
        LabeledExample(example_id=eid, content_hash=h, caption=cap, label=index_of[name])
        for name in surviving
        for eid, h, cap in by_name[name]
    ]
    examples.sort(key=lambda ex: (ex.label, ex.example_id))
    return DatasetManifest(dataset_name=dataset_name, classes=tuple(surviving), examples=tuple(examples))


@dataclass(frozen=True)
class Detector:
    """A trained 2-class head plus the feature tables needed to score images."""

    head: FusionHeadParams
    img: FeatureTable
    txt: FeatureTable
    food_index: int = 0

    def __post_init__(self):
        if self.head.n_classes != 2:
            raise ValidationError(f"detector head must have 2 classes, got {self.head.n_classes}")
        if self.food_index not in (0, 1):
            raise ValidationError("food_index must be 0 or 1")


def bootstrap_binary_manifest(
    positives: DatasetManifest,
    candidate_store: CorpusStore,
    detector: Detector,
    threshold: float,
    decisions: ReviewDecisions | None = None,
    target_per_class: int = 1,
    *,
    seed: int = 0,
    dataset_name: str = "food-binary",
) -> DatasetManifest:
    """Score candidate images and assemble a balanced food/nonfood manifest.

    Images already present in the positives manifest (by content hash) are
    not candidates. Food side: probability >= threshold, minus rejects and
    relabel-nonfood overrides, plus relabel-food overrides; highest scores
    kept when truncating to target_per_class. Nonfood side: everything else,
    including food candidates squeezed out by truncation, sampled uniformly
    under the seed. Either side short of target raises a shortfall error
    carrying the counts.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("threshold must be in [0, 1]")
    if target_per_class < 1:
        raise ValidationError("target_per_class must be >= 1")
    decisions = decisions if decisions is not None else ReviewDecisions.empty()
    known_hashes = {ex.content_hash for ex in positives.examples}

    candidates = [
        (eid, h, cap)
        for eid, h, cap, _ in _image_candidates(candidate_store)
        if h not in known_hashes
    ]
    img_rows = np.zeros((len(candidates), detector.img.dim))
    txt_rows = np.zeros((len(candidates), detector.txt.dim))
    for i, (eid, _, _) in enumerate(candidates):
        img_row = detector.img.get(eid)
        if img_row is None:
            raise ValidationError(f"no image features for candidate {eid!r}")
        img_rows[i] = img_row
        txt_row = detector.txt.get(eid)
        if txt_row is not None:
            txt_rows[i] = txt_row
    if candidates:
        probs = forward(detector.head, img_rows, txt_rows)[:, detector.food_index]
    else:
        probs = np.zeros(0)

    food_pool: list[tuple[float, str, str, str]] = []  # (score, example_id, hash, caption)
    nonfood_pool: list[tuple[str, str, str]] = []
    for (eid, h, cap), p in zip(candidates, probs):
        decision = decisions.get(eid)
        if decision is not None and decision.action == DECISION_RELABEL:
            if decision.new_label == "food":
                food_pool.append((float(p), eid, h, cap))
            elif decision.new_label == "nonfood":
                nonfood_pool.append((eid, h, cap))
            else:
                raise ValidationError(
                    f"{eid}: relabel target {decision.new_label!r} must be food or nonfood"
                )
            continue
        if float(p) >= threshold and not (decision is not None and decision.action == DECISION_REJECT):
            food_pool.append((float(p), eid, h, cap))
        else:
            nonfood_pool.append((eid, h, cap))

    if len(food_pool) < target_per_class:
        raise ShortfallError("food", available=len(food_pool), needed=target_per_class)
    food_pool.sort(key=lambda t: (-t[0], t[1]))
    food_side = [(eid, h, cap) for _, eid, h, cap in food_pool[:target_per_class]]
    # candidates squeezed out of the food side by truncation rejoin the pool
    # the nonfood sample is drawn from
    nonfood_pool.extend((eid, h, cap) for _, eid, h, cap in food_pool[target_per_class:])
    if len(nonfood_pool) < target_per_class:
        raise ShortfallError("nonfood", available=len(nonfood_pool), needed=target_per_class)
    rng = random.Random(derive_seed(seed, "binary-nonfood"))
    nonfood_side = _sample_without_replacement(nonfood_pool, target_per_class, rng)

    examples = [
        LabeledExample(example_id=eid, content_hash=h, caption=cap, label=0)
        for eid, h, cap in food_side
    ] + [
        LabeledExample(example_id=eid, content_hash=h, caption=cap, label=1)
        for eid, h, cap in nonfood_side
    ]
    examples.sort(key=lambda ex: (ex.label, ex.example_id))
    return DatasetManifest(dataset_name=dataset_name, classes=BINARY_CLASSES, examples=tuple(examples))


def _sample_without_replacement(pool: list, k: int, rng: random.Random) -> list:
    # Partial Fisher-Yates: fixed algorithm so draws never depend on the
    # stdlib's sample() implementation details.
    items = list(pool)
    for i in range(k):
        j = rng.randrange(i, len(items))
        items[i], items[j] = items[j], items[i]
    return items[:k]


def assign_splits(manifest: DatasetManifest, seed: int) -> DatasetManifest:
    """Deal each class into a holdout slice plus five folds, seeded per class.

    Per class: shuffle, first floor(10%) (at least 1) of the examples go to
    HOLDOUT, the rest round-robin into folds 0..4. Any fold then serves as
    the validation slice while the other four train.
    """
    groups = manifest.by_class()
    fold_of: dict[str, int | str] = {}
    for label in sorted(groups):
        exs = groups[label]
        class_name = manifest.classes[label]
        if len(exs) < 10:
            raise ValidationError(
                f"class {class_name!r} has {len(exs)} examples, need at least 10 to split"
            )
        ids = [ex.example_id for ex in exs]
        _shuffle(ids, random.Random(derive_seed(seed, "split", class_name)))
        n_holdout = max(1, math.floor(0.10 * len(ids)))
        for eid in ids[:n_holdout]:
            fold_of[eid] = FOLD_HOLDOUT
        for t, eid in enumerate(ids[n_holdout:]):
            fold_of[eid] = t % N_FOLDS
    return manifest.with_examples(
        [replace(ex, fold=fold_of[ex.example_id]) for ex in manifest.examples],
        split_seed=seed,
    )


def _shuffle(items: list, rng: random.Random) -> None:
    # In-place Fisher-Yates, pinned here so assignments are stable even if
    # random.shuffle's internals ever change.
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]
