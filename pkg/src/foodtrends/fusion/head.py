"""The fusion head: concat -> hidden relu -> softmax, with analytic grads.

All math here is 64-bit. Shapes follow the column convention of the stored
matrices: W1 is (d_img+d_txt, hidden), W2 is (hidden, n_classes), so a batch
of row vectors flows left to right as x @ W1 @ W2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, ValidationError
from ..seeds import derive_seed

HEAD_MAGIC = b"KENYHEAD"
HEAD_VERSION = 1
_HEAD_HEADER = struct.Struct("<8sIIIII")  # magic, version, d_img, d_txt, hidden, n_classes

DEFAULT_HIDDEN = 10_000


@dataclass
class FusionHeadParams:
    d_img: int
    d_txt: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        if self.d_img < 1 or self.d_txt < 1:
            raise ValidationError("feature dims must be positive")
        d_in = self.d_img + self.d_txt
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden = self.W1.shape[1] if self.W1.ndim == 2 else -1
        if self.W1.shape != (d_in, hidden) or hidden < 1:
            raise ValidationError(f"W1 must be ({d_in}, hidden), got {self.W1.shape}")
        if self.b1.shape != (hidden,):
            raise ValidationError(f"b1 must be ({hidden},), got {self.b1.shape}")
        n_classes = self.W2.shape[1] if self.W2.ndim == 2 else -1
        if self.W2.shape != (hidden, n_classes) or n_classes < 2:
            raise ValidationError(f"W2 must be ({hidden}, n_classes>=2), got {self.W2.shape}")
        if self.b2.shape != (n_classes,):
            raise ValidationError(f"b2 must be ({n_classes},), got {self.b2.shape}")
        for name in ("W1", "b1", "W2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite values")

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[1]

    def copy(self) -> "FusionHeadParams":
        return FusionHeadParams(
            d_img=self.d_img,
            d_txt=self.d_txt,
            W1=self.W1.copy(),
            b1=self.b1.copy(),
            W2=self.W2.copy(),
            b2=self.b2.copy(),
        )


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


def init_params(d_img: int, d_txt: int, hidden: int, n_classes: int, seed: int) -> FusionHeadParams:
    """Seeded uniform init in +/- sqrt(6/(fan_in+fan_out)); zero biases."""
    if hidden < 1:
        raise ValidationError("hidden must be positive")
    if n_classes < 2:
        raise ValidationError("n_classes must be at least 2")
    rng = np.random.default_rng(derive_seed(seed, "init"))
    d_in = d_img + d_txt
    lim1 = np.sqrt(6.0 / (d_in + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_classes))
    return FusionHeadParams(
        d_img=d_img,
        d_txt=d_txt,
        W1=rng.uniform(-lim1, lim1, size=(d_in, hidden)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-lim2, lim2, size=(hidden, n_classes)),
        b2=np.zeros(n_classes),
    )


def _as_batch(x, dim: int, name: str):
    arr = np.asarray(x, dtype=np.float64)
    squeezed = arr.ndim == 1
    if squeezed:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(f"{name} must have dim {dim}, got shape {np.asarray(x).shape}")
    return arr, squeezed


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: FusionHeadParams, x_img, x_txt) -> np.ndarray:
    """Class probabilities for one example (1-D inputs) or a batch (2-D)."""
    xi, squeezed_i = _as_batch(x_img, params.d_img, "x_img")
    xt, squeezed_t = _as_batch(x_txt, params.d_txt, "x_txt")
    if xi.shape[0] != xt.shape[0]:
        raise ValidationError(f"batch sizes differ: {xi.shape[0]} image vs {xt.shape[0]} text")
    x = np.concatenate([xi, xt], axis=1)
    h = np.maximum(x @ params.W1 + params.b1, 0.0)
    probs = _softmax(h @ params.W2 + params.b2)
    return probs[0] if squeezed_i and squeezed_t else probs


def loss_and_gradients(params: FusionHeadParams, x_img, x_txt, labels):
    """Mean cross-entropy over the batch and its analytic gradients."""
    xi, _ = _as_batch(x_img, params.d_img, "x_img")
    xt, _ = _as_batch(x_txt, params.d_txt, "x_txt")
    y = np.asarray(labels)
    if y.ndim == 0:
        y = y[np.newaxis]
    if xi.shape[0] != xt.shape[0] or xi.shape[0] != y.shape[0]:
        raise ValidationError("batch sizes of x_img, x_txt, labels must agree")
    n = xi.shape[0]
    if n == 0:
        raise ValidationError("batch must be non-empty")
    if y.dtype.kind not in "iu" or y.min() < 0 or y.max() >= params.n_classes:
        raise ValidationError(f"labels must be class indices in [0, {params.n_classes})")

    x = np.concatenate([xi, xt], axis=1)
    pre = x @ params.W1 + params.b1
    h = np.maximum(pre, 0.0)
    z = h @ params.W2 + params.b2

    shifted = z - z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), y].mean())

    dz = np.exp(log_probs)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    g_w2 = h.T @ dz
    g_b2 = dz.sum(axis=0)
    dh = (dz @ params.W2.T) * (pre > 0.0)
    g_w1 = x.T @ dh
    g_b1 = dh.sum(axis=0)
    return loss, Gradients(W1=g_w1, b1=g_b1, W2=g_w2, b2=g_b2)


def save_head(params: FusionHeadParams, path) -> None:
    path = Path(path)
    chunks = [
        _HEAD_HEADER.pack(
            HEAD_MAGIC, HEAD_VERSION, params.d_img, params.d_txt, params.hidden, params.n_classes
        )
    ]
    for arr in (params.W1, params.b1, params.W2, params.b2):
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def load_head(path) -> FusionHeadParams:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read head file {path}: {exc}") from exc
    if len(buf) < _HEAD_HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(buf)}")
    magic, version, d_img, d_txt, hidden, n_classes = _HEAD_HEADER.unpack_from(buf, 0)
    if magic != HEAD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != HEAD_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    d_in = d_img + d_txt
    sizes = [d_in * hidden, hidden, hidden * n_classes, n_classes]
    expected = _HEAD_HEADER.size + 8 * sum(sizes)
    if len(buf) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(buf)}")
    offset = _HEAD_HEADER.size
    arrays = []
    for size in sizes:
        arrays.append(np.frombuffer(buf, dtype="<f8", count=size, offset=offset).copy())
        offset += 8 * size
    w1, b1, w2, b2 = arrays
    try:
        return FusionHeadParams(
            d_img=d_img,
            d_txt=d_txt,
            W1=w1.reshape(d_in, hidden),
            b1=b1,
            W2=w2.reshape(hidden, n_classes),
            b2=b2,
        )
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
