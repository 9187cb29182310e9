"""Backbones and the image/text preparation in front of them.

Image side: PIL decode, optional seeded augmentation (rotation within 30
degrees, horizontal flip at p=0.5, color jitter), ImageNet-style resize and
center crop, then the penultimate activations of a torchvision ResNeXt101.
Weights are never downloaded: a locally cached ImageNet checkpoint is used
when present, otherwise the network gets a fixed-seed initialization, which
keeps exports deterministic and format-correct at the cost of untrained
features.

Text side: a hashed bag-of-words encoder. Every token maps to a fixed
pseudo-random vector derived from its hash; a caption encodes to the mean of
its token vectors. Deterministic, dependency-free, and pools to the same
768-wide interface a pretrained sentence encoder would fill.
"""

import hashlib
import logging
import random
import re
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, ImageEnhance

from .errors import ExportError

log = logging.getLogger("featexport")

IMAGE_BACKBONE_DEFAULT = "resnext101_32x8d"
TEXT_BACKBONE_DEFAULT = "hashed-bow"

CROP_SIZE = 224
RESIZE_SHORTER = 256
ROTATION_MAX_DEG = 30.0
JITTER_RANGE = (0.8, 1.2)

# ImageNet channel statistics, the convention the backbone was trained under
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

_BATCH = 8


def stable_seed(*parts) -> int:
    """Platform-stable 63-bit seed from the given parts."""
    joined = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def decode_image(path) -> Image.Image:
    with Image.open(path) as img:
        return img.convert("RGB")


def augment_image(img: Image.Image, rng: random.Random) -> Image.Image:
    """Rotation, flip, color jitter, in that order, all driven by rng."""
    angle = rng.uniform(-ROTATION_MAX_DEG, ROTATION_MAX_DEG)
    img = img.rotate(angle, resample=Image.Resampling.BILINEAR)
    if rng.random() < 0.5:
        img = img.transpose(Image.Transpose.FLIP_LEFT_RIGHT)
    lo, hi = JITTER_RANGE
    img = ImageEnhance.Brightness(img).enhance(rng.uniform(lo, hi))
    img = ImageEnhance.Contrast(img).enhance(rng.uniform(lo, hi))
    img = ImageEnhance.Color(img).enhance(rng.uniform(lo, hi))
    return img


def preprocess_image(img: Image.Image) -> np.ndarray:
    """Resize shorter side to 256, center-crop 224, normalize, CHW float32."""
    w, h = img.size
    scale = RESIZE_SHORTER / min(w, h)
    img = img.resize((round(w * scale), round(h * scale)), Image.Resampling.BILINEAR)
    w, h = img.size
    left = (w - CROP_SIZE) // 2
    top = (h - CROP_SIZE) // 2
    img = img.crop((left, top, left + CROP_SIZE, top + CROP_SIZE))
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    return arr.transpose(2, 0, 1)


class ImageBackbone:
    """Wraps a torch module whose forward yields the penultimate activations."""

    def __init__(self, name: str, dim: int, model):
        self.name = name
        self.dim = dim
        self._model = model

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        """(n, 3, 224, 224) float32 in, (n, dim) float32 out."""
        import torch

        out = []
        with torch.no_grad():
            for start in range(0, len(batch), _BATCH):
                chunk = torch.from_numpy(batch[start : start + _BATCH])
                out.append(self._model(chunk).numpy().astype(np.float32))
        return np.concatenate(out) if out else np.zeros((0, self.dim), dtype=np.float32)


def _cached_checkpoint(torch, weights) -> bool:
    # offline policy: a checkpoint counts only if torch hub already has it
    name = Path(str(weights.url)).name
    return (Path(torch.hub.get_dir()) / "checkpoints" / name).exists()


@lru_cache(maxsize=2)
def load_image_backbone(name: str) -> ImageBackbone:
    if name != IMAGE_BACKBONE_DEFAULT:
        raise ExportError(f"unsupported image backbone {name!r}")
    try:
        import torch
        from torchvision import models
    except ImportError as exc:
        raise ExportError(f"image exports need torch and torchvision: {exc}") from exc

    weights = None
    candidate = getattr(models, "ResNeXt101_32X8D_Weights", None)
    if candidate is not None and _cached_checkpoint(torch, candidate.IMAGENET1K_V1):
        weights = candidate.IMAGENET1K_V1
    if weights is None:
        log.info("%s: no cached ImageNet checkpoint, using fixed-seed initialization", name)

    torch.manual_seed(stable_seed("weights", name))
    model = models.resnext101_32x8d(weights=weights)
    model.fc = torch.nn.Identity()  # expose the 2048-wide pooled features
    model.eval()
    return ImageBackbone(name, 2048, model)


class HashedBowEncoder:
    """Mean of per-token hash-seeded vectors; empty text encodes to zeros."""

    def __init__(self, dim: int = 768):
        self.name = TEXT_BACKBONE_DEFAULT
        self.dim = dim
        self._token_vectors: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._token_vectors.get(token)
        if vec is None:
            rng = np.random.default_rng(stable_seed(self.name, self.dim, token))
            vec = rng.standard_normal(self.dim).astype(np.float32)
            self._token_vectors[token] = vec
        return vec

    def encode(self, text: str) -> np.ndarray:
        tokens = re.findall(r"[a-z0-9']+", text.lower())
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        stacked = np.stack([self._vector(t) for t in tokens])
        return stacked.mean(axis=0).astype(np.float32)


def load_text_encoder(name: str) -> HashedBowEncoder:
    if name != TEXT_BACKBONE_DEFAULT:
        raise ExportError(f"unsupported text backbone {name!r}")
    return HashedBowEncoder()


def strip_label_hashtags(text: str, class_names) -> str:
    """Drop hashtags that spell a class name with the spaces removed.

    Case-insensitive, so #NyamaChoma falls when "nyama choma" is a class.
    Plain-text mentions and unrelated hashtags stay.
    """
    concatenated = {n.replace(" ", "").lower() for n in class_names}

    def drop(match):
        return "" if match.group(1).lower() in concatenated else match.group(0)

    return re.sub(r"#(\w+)", drop, text)
