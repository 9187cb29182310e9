"""Manifest-to-KENYFEAT export driver."""

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import (
    IMAGE_BACKBONE_DEFAULT,
    TEXT_BACKBONE_DEFAULT,
    augment_image,
    decode_image,
    load_image_backbone,
    load_text_encoder,
    preprocess_image,
    stable_seed,
    strip_label_hashtags,
)
from .errors import ExportError
from .kenyfeat import MODALITY_IMAGE, MODALITY_TEXT, write_kenyfeat
from .manifest import read_manifest

MODALITIES = ("image", "text")


@dataclass(frozen=True)
class ExportConfig:
    manifest: Path
    media_dir: Path
    modality: str
    out: Path
    backbone: str | None = None  # None picks the modality's default
    augment: bool = False
    image_dim: int = 2048
    text_dim: int = 768
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "media_dir", Path(self.media_dir))
        object.__setattr__(self, "out", Path(self.out))
        if self.modality not in MODALITIES:
            raise ExportError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.augment and self.modality != "image":
            raise ExportError("augmentation is an image-space step; text exports cannot set it")
        if self.image_dim < 1 or self.text_dim < 1:
            raise ExportError("feature dims must be positive")

    @property
    def effective_backbone(self) -> str:
        if self.backbone is not None:
            return self.backbone
        return IMAGE_BACKBONE_DEFAULT if self.modality == "image" else TEXT_BACKBONE_DEFAULT


@dataclass(frozen=True)
class ExportResult:
    out: Path
    written: int
    skipped: tuple  # (example_id, reason) pairs, manifest order
    errors_file: Path | None


def _media_path(media_dir: Path, content_hash: str) -> Path:
    return media_dir / content_hash[:2] / content_hash


def _export_image(cfg: ExportConfig, manifest) -> ExportResult:
    if not cfg.media_dir.is_dir():
        raise ExportError(f"media dir {cfg.media_dir} is not a directory")
    backbone = load_image_backbone(cfg.effective_backbone)
    if cfg.image_dim != backbone.dim:
        raise ExportError(
            f"image_dim {cfg.image_dim} does not match {backbone.name} output ({backbone.dim})"
        )

    kept_ids, tensors, skipped = [], [], []
    for ex in manifest.examples:
        path = _media_path(cfg.media_dir, ex.content_hash)
        try:
            img = decode_image(path)
        except OSError as exc:
            skipped.append((ex.example_id, str(exc)))
            continue
        if cfg.augment:
            img = augment_image(img, random.Random(stable_seed(cfg.seed, ex.example_id)))
        kept_ids.append(ex.example_id)
        tensors.append(preprocess_image(img))

    batch = np.stack(tensors) if tensors else np.zeros((0, 3, 224, 224), dtype=np.float32)
    features = backbone.encode_batch(batch)
    write_kenyfeat(cfg.out, MODALITY_IMAGE, backbone.dim, zip(kept_ids, features))

    # keep exactly one source of truth next to the output: a clean export
    # must also clear any sidecar a previous run left behind
    errors_file = cfg.out.with_name(cfg.out.name + ".errors")
    if skipped:
        lines = [f"{eid}\t{reason}" for eid, reason in skipped]
        errors_file.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        errors_file.unlink(missing_ok=True)
        errors_file = None
    return ExportResult(cfg.out, len(kept_ids), tuple(skipped), errors_file)


def _export_text(cfg: ExportConfig, manifest) -> ExportResult:
    encoder = load_text_encoder(cfg.effective_backbone)
    if cfg.text_dim != encoder.dim:
        raise ExportError(
            f"text_dim {cfg.text_dim} does not match {encoder.name} output ({encoder.dim})"
        )

    # hashtagged class names are stripped before encoding so the text
    # features cannot smuggle the label in
    rows = []
    for ex in manifest.examples:
        stripped = strip_label_hashtags(ex.caption, manifest.classes)
        rows.append((ex.example_id, encoder.encode(stripped)))
    write_kenyfeat(cfg.out, MODALITY_TEXT, encoder.dim, rows)
    return ExportResult(cfg.out, len(rows), (), None)


def export_features(cfg: ExportConfig) -> ExportResult:
    """Run the configured backbone over the manifest, write one KENYFEAT file.

    Image exports skip undecodable or missing media and list the skips in a
    sidecar errors file next to the output; text exports emit one row per
    example with empty captions encoded as zero vectors. Deterministic for a
    fixed config.
    """
    manifest = read_manifest(cfg.manifest)
    if cfg.modality == "image":
        return _export_image(cfg, manifest)
    return _export_text(cfg, manifest)
