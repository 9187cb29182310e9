"""Fold-wise training of the fusion head and prediction over feature tables.

Training is minibatch SGD with classical momentum (v <- mu*v - lr*grad,
theta <- theta + v), epoch-wise shuffles derived from the config seed, and
model selection by validation top-1 accuracy with ties going to the earliest
epoch. Everything is deterministic given (manifest, tables, fold, config).

Examples with no text row fall back to a zero vector (posts without captions
stay classifiable); a missing image row is always an error.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from ..corpus.manifest import FOLD_HOLDOUT, FOLD_UNASSIGNED, N_FOLDS, DatasetManifest
from ..errors import ValidationError
from ..seeds import derive_seed
from .features import FeatureTable
from .head import DEFAULT_HIDDEN, FusionHeadParams, forward, init_params, loss_and_gradients

DEFAULT_LEARNING_RATE = 0.0001
DEFAULT_MOMENTUM = 0.9
DEFAULT_EPOCHS = 12
DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    momentum: float = DEFAULT_MOMENTUM
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN

    def __post_init__(self):
        # learning_rate 0 is allowed: a no-op run is the cheapest determinism probe.
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must be in [0, 1)")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.hidden < 1:
            raise ValidationError("hidden must be >= 1")


@dataclass(frozen=True)
class Prediction:
    example_id: str
    probabilities: tuple
    top_label: int
    confidence: float


def _gather(examples, img: FeatureTable, txt: FeatureTable):
    """Stack feature rows for the given examples; count zero-text fallbacks."""
    n = len(examples)
    x_img = np.zeros((n, img.dim))
    x_txt = np.zeros((n, txt.dim))
    y = np.zeros(n, dtype=np.int64)
    zero_text = 0
    for i, ex in enumerate(examples):
        row = img.get(ex.example_id)
        if row is None:
            raise ValidationError(f"no image features for example {ex.example_id!r}")
        x_img[i] = row
        trow = txt.get(ex.example_id)
        if trow is None:
            zero_text += 1
        else:
            x_txt[i] = trow
        y[i] = ex.label
    return x_img, x_txt, y, zero_text


def _shuffled_indices(n: int, rng: random.Random) -> list:
    # Fisher-Yates pinned locally so epoch order never shifts under us.
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def train(
    manifest: DatasetManifest,
    img: FeatureTable,
    txt: FeatureTable,
    fold: int,
    cfg: TrainConfig,
):
    """Train on four folds, select on the fifth; returns (params, history)."""
    if not isinstance(fold, int) or not 0 <= fold < N_FOLDS:
        raise ValidationError(f"fold must be in 0..{N_FOLDS - 1}, got {fold!r}")
    train_examples = [
        ex for ex in manifest.examples
        if ex.fold not in (FOLD_HOLDOUT, FOLD_UNASSIGNED) and ex.fold != fold
    ]
    val_examples = [ex for ex in manifest.examples if ex.fold == fold]
    if not train_examples:
        raise ValidationError(f"fold {fold}: empty train split")
    if not val_examples:
        raise ValidationError(f"fold {fold}: empty validation split")

    x_img, x_txt, y, zero_text_train = _gather(train_examples, img, txt)
    v_img, v_txt, v_y, zero_text_val = _gather(val_examples, img, txt)

    n_classes = len(manifest.classes)
    params = init_params(img.dim, txt.dim, cfg.hidden, n_classes, cfg.seed)
    velocity = {
        "W1": np.zeros_like(params.W1),
        "b1": np.zeros_like(params.b1),
        "W2": np.zeros_like(params.W2),
        "b2": np.zeros_like(params.b2),
    }

    best = params.copy()
    best_accuracy = -1.0
    best_epoch = 0
    epochs_log = []
    n = len(train_examples)
    for epoch in range(1, cfg.epochs + 1):
        order = _shuffled_indices(n, random.Random(derive_seed(cfg.seed, "epoch", epoch)))
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(params, x_img[batch], x_txt[batch], y[batch])
            loss_sum += loss * len(batch)
            for name in velocity:
                velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * getattr(grads, name)
                setattr(params, name, getattr(params, name) + velocity[name])
        probs = forward(params, v_img, v_txt)
        accuracy = float((probs.argmax(axis=1) == v_y).mean())
        epochs_log.append(
            {"epoch": epoch, "train_loss": loss_sum / n, "val_accuracy": accuracy}
        )
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_epoch = epoch
            best = params.copy()

    history = {
        "fold": fold,
        "epochs": epochs_log,
        "best_epoch": best_epoch,
        "best_val_accuracy": best_accuracy,
        "zero_text_train": zero_text_train,
        "zero_text_val": zero_text_val,
    }
    return best, history


def predict(params: FusionHeadParams, example_id: str, img_row, txt_row=None) -> Prediction:
    """Single-example prediction; a missing text row means a zero vector."""
    if txt_row is None:
        txt_row = np.zeros(params.d_txt)
    probs = forward(params, img_row, txt_row)
    top = int(np.argmax(probs))  # argmax takes the lowest index on ties
    return Prediction(
        example_id=example_id,
        probabilities=tuple(float(p) for p in probs),
        top_label=top,
        confidence=float(probs[top]),
    )


def predict_batch(params: FusionHeadParams, example_ids, img: FeatureTable, txt: FeatureTable):
    """Predictions for many ids at once, reading rows from feature tables."""
    ids = list(example_ids)
    if not ids:
        return []
    x_img = np.zeros((len(ids), params.d_img))
    x_txt = np.zeros((len(ids), params.d_txt))
    for i, example_id in enumerate(ids):
        row = img.get(example_id)
        if row is None:
            raise ValidationError(f"no image features for example {example_id!r}")
        x_img[i] = row
        trow = txt.get(example_id)
        if trow is not None:
            x_txt[i] = trow
    probs = forward(params, x_img, x_txt)
    tops = probs.argmax(axis=1)
    return [
        Prediction(
            example_id=ids[i],
            probabilities=tuple(float(p) for p in probs[i]),
            top_label=int(tops[i]),
            confidence=float(probs[i, tops[i]]),
        )
        for i in range(len(ids))
    ]
