"""Tiny convolutional depth classifier with two parallel heads.

Architecture: the scalar image is normalized and stacked with a fixed row
coordinate channel (road scenes carry a strong depth-from-height prior and
the convolution would otherwise be blind to position), then a shared
encoder of two same-padded k x k convolution layers with leaky ReLU, then
one or two independent 1x1 linear heads mapping the features to C per-bin
logits. Both heads have identical structure and independent parameters;
the shared encoder receives the sum of the two branch losses' gradients.

Everything is plain float64 numpy with an explicit backward pass
(im2col/col2im), so gradients can be checked against finite differences
and training is bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core import ForegroundMask, LabelMap, LogitVolume
from ..errors import DivergenceError, InvalidRangeError, ShapeMismatchError
from ..losses import LossWeights, loss_bg, loss_fg, loss_gradient, separated_objective
from .rng import SplitMix64

INPUT_CENTER = 0.45  # typical rendered-value midpoint
INPUT_SCALE = 4.0
LEAK = 0.1  # leaky-ReLU slope; plain ReLU starves on all-positive inputs
NUM_INPUT_CHANNELS = 2  # normalized value + row coordinate


@dataclass(frozen=True)
class ToyModel:
    conv1_w: np.ndarray  # (k, k, NUM_INPUT_CHANNELS, F)
    conv1_b: np.ndarray  # (F,)
    conv2_w: np.ndarray  # (k, k, F, F)
    conv2_b: np.ndarray  # (F,)
    heads_w: tuple[np.ndarray, ...]  # each (F, C)
    heads_b: tuple[np.ndarray, ...]  # each (C,)

    @property
    def num_heads(self) -> int:
        return len(self.heads_w)

    @property
    def num_bins(self) -> int:
        return self.heads_w[0].shape[1]

    @property
    def kernel(self) -> int:
        return self.conv1_w.shape[0]


def init_model(
    num_bins: int,
    hidden: int = 8,
    kernel: int = 3,
    num_heads: int = 2,
    seed: int = 0,
    head_scale: float = 0.05,
) -> ToyModel:
    """He-style uniform init; heads get small independent random weights."""
    if num_heads not in (1, 2):
        raise InvalidRangeError(f"supported head counts are 1 and 2, got {num_heads}")
    if kernel % 2 != 1:
        raise InvalidRangeError("kernel size must be odd for same padding")
    rng = SplitMix64(seed)

    def uniform(shape, limit):
        n = int(np.prod(shape))
        return rng.uniforms(n, -limit, limit).reshape(shape)

    conv1_w = uniform((kernel, kernel, NUM_INPUT_CHANNELS, hidden),
                      np.sqrt(6.0 / (kernel * kernel * NUM_INPUT_CHANNELS)))
    conv2_w = uniform((kernel, kernel, hidden, hidden),
                      np.sqrt(6.0 / (kernel * kernel * hidden)))
    heads_w = tuple(uniform((hidden, num_bins), head_scale) for _ in range(num_heads))
    heads_b = tuple(np.zeros(num_bins) for _ in range(num_heads))
    return ToyModel(
        conv1_w=conv1_w, conv1_b=np.zeros(hidden),
        conv2_w=conv2_w, conv2_b=np.zeros(hidden),
        heads_w=heads_w, heads_b=heads_b,
    )


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(H, W, Cin) -> (H, W, k*k*Cin) patches with zero padding."""
    h, w, cin = x.shape
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((h, w, k, k, cin), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j, :] = xp[i:i + h, j:j + w, :]
    return cols.reshape(h, w, k * k * cin)


def _col2im(dcols: np.ndarray, k: int, cin: int) -> np.ndarray:
    """Adjoint of _im2col: scatter patch gradients back to the input plane."""
    h, w = dcols.shape[:2]
    pad = k // 2
    dcols = dcols.reshape(h, w, k, k, cin)
    dxp = np.zeros((h + 2 * pad, w + 2 * pad, cin), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[i:i + h, j:j + w, :] += dcols[:, :, i, j, :]
    return dxp[pad:pad + h, pad:pad + w, :]


def input_features(image: np.ndarray) -> np.ndarray:
    """(H, W) image -> (H, W, 2) normalized value + row coordinate in [-1, 1]."""
    h, w = image.shape
    rows = np.repeat(np.linspace(-1.0, 1.0, h)[:, None], w, axis=1)
    return np.stack([(image - INPUT_CENTER) * INPUT_SCALE, rows], axis=-1)


def _leaky(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, LEAK * z)


def _leaky_slope(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, LEAK)


def _forward_cache(model: ToyModel, image: np.ndarray) -> dict:
    if image.ndim != 2:
        raise ShapeMismatchError(f"image must be (H, W), got {image.shape}")
    k = model.kernel
    x = input_features(image.astype(np.float64))
    cols1 = _im2col(x, k)
    z1 = cols1 @ model.conv1_w.reshape(-1, model.conv1_w.shape[-1]) + model.conv1_b
    a1 = _leaky(z1)
    cols2 = _im2col(a1, k)
    z2 = cols2 @ model.conv2_w.reshape(-1, model.conv2_w.shape[-1]) + model.conv2_b
    a2 = _leaky(z2)
    logits = [a2 @ w + b for w, b in zip(model.heads_w, model.heads_b)]
    return {"cols1": cols1, "z1": z1, "cols2": cols2, "z2": z2, "a2": a2,
            "logits": logits}


def forward(model: ToyModel, image: np.ndarray) -> tuple[LogitVolume, ...]:
    """Logit volumes from every head, in head order (fg branch first)."""
    cache = _forward_cache(model, image)
    return tuple(LogitVolume(scores=lg) for lg in cache["logits"])


def _zero_grads(model: ToyModel) -> dict:
    return {
        "conv1_w": np.zeros_like(model.conv1_w),
        "conv1_b": np.zeros_like(model.conv1_b),
        "conv2_w": np.zeros_like(model.conv2_w),
        "conv2_b": np.zeros_like(model.conv2_b),
        "heads_w": [np.zeros_like(w) for w in model.heads_w],
        "heads_b": [np.zeros_like(b) for b in model.heads_b],
    }


def _backward(model: ToyModel, cache: dict, dlogits: list[np.ndarray], grads: dict) -> None:
    """Accumulate parameter gradients for one image into `grads`."""
    a2 = cache["a2"]
    da2 = np.zeros_like(a2)
    for i, dlg in enumerate(dlogits):
        grads["heads_w"][i] += np.einsum("hwf,hwc->fc", a2, dlg)
        grads["heads_b"][i] += dlg.sum(axis=(0, 1))
        da2 += dlg @ model.heads_w[i].T

    dz2 = da2 * _leaky_slope(cache["z2"])
    f2 = model.conv2_w.shape[-1]
    grads["conv2_w"] += np.einsum("hwp,hwf->pf", cache["cols2"], dz2).reshape(model.conv2_w.shape)
    grads["conv2_b"] += dz2.sum(axis=(0, 1))
    da1 = _col2im(dz2 @ model.conv2_w.reshape(-1, f2).T, model.kernel,
                  model.conv2_w.shape[2])

    dz1 = da1 * _leaky_slope(cache["z1"])
    grads["conv1_w"] += np.einsum("hwp,hwf->pf", cache["cols1"], dz1).reshape(model.conv1_w.shape)
    grads["conv1_b"] += dz1.sum(axis=(0, 1))


def batch_loss_and_grads(
    model: ToyModel,
    batch: list[tuple[np.ndarray, LabelMap, ForegroundMask]],
    weights: LossWeights,
) -> tuple[float, float, dict]:
    """Mean losses over the batch and matching parameter gradients.

    Two-headed models train head 0 with the foreground-branch loss and
    head 1 with the background-branch loss; the shared encoder accumulates
    both. Single-headed models train with the separated objective at
    weights.lam and report that value as both losses.
    """
    if not batch:
        raise InvalidRangeError("batch must contain at least one sample")
    grads = _zero_grads(model)
    total_f = 0.0
    total_b = 0.0
    scale = 1.0 / len(batch)
    for image, targets, fg in batch:
        cache = _forward_cache(model, image)
        if not all(np.isfinite(lg).all() for lg in cache["logits"]):
            raise DivergenceError("model outputs went non-finite; lower the learning rate")
        if model.num_heads == 2:
            vol_f = LogitVolume(scores=cache["logits"][0])
            vol_b = LogitVolume(scores=cache["logits"][1])
            total_f += loss_fg(vol_f, targets, fg, weights.lam_f)
            total_b += loss_bg(vol_b, targets, fg, weights.lam_b)
            dlogits = [
                scale * loss_gradient(vol_f, targets, fg, weights, "fg"),
                scale * loss_gradient(vol_b, targets, fg, weights, "bg"),
            ]
        else:
            vol = LogitVolume(scores=cache["logits"][0])
            value = separated_objective(vol, targets, fg, weights.lam)
            total_f += value
            total_b += value
            dlogits = [scale * loss_gradient(vol, targets, fg, weights, "single")]
        _backward(model, cache, dlogits, grads)
    return total_f * scale, total_b * scale, grads


def train_step(
    model: ToyModel,
    batch: list[tuple[np.ndarray, LabelMap, ForegroundMask]],
    weights: LossWeights,
    lr: float,
) -> tuple[ToyModel, tuple[float, float]]:
    """One SGD step; returns the updated model and (fg-branch, bg-branch) losses."""
    if lr < 0:
        raise InvalidRangeError(f"learning rate must be >= 0, got {lr}")
    loss_f, loss_b, grads = batch_loss_and_grads(model, batch, weights)
    if not (np.isfinite(loss_f) and np.isfinite(loss_b)):
        raise DivergenceError(f"non-finite loss ({loss_f}, {loss_b}); lower the learning rate")
    updated = replace(
        model,
        conv1_w=model.conv1_w - lr * grads["conv1_w"],
        conv1_b=model.conv1_b - lr * grads["conv1_b"],
        conv2_w=model.conv2_w - lr * grads["conv2_w"],
        conv2_b=model.conv2_b - lr * grads["conv2_b"],
        heads_w=tuple(w - lr * g for w, g in zip(model.heads_w, grads["heads_w"])),
        heads_b=tuple(b - lr * g for b, g in zip(model.heads_b, grads["heads_b"])),
    )
    return updated, (loss_f, loss_b)


def to_vector(model: ToyModel) -> np.ndarray:
    """Flatten all parameters (fixed order) for gradient checking."""
    parts = [model.conv1_w, model.conv1_b, model.conv2_w, model.conv2_b]
    parts.extend(model.heads_w)
    parts.extend(model.heads_b)
    return np.concatenate([p.reshape(-1) for p in parts])


def from_vector(model: ToyModel, vec: np.ndarray) -> ToyModel:
    """Rebuild a model with the same shapes from a flat parameter vector."""
    shapes = [model.conv1_w.shape, model.conv1_b.shape,
              model.conv2_w.shape, model.conv2_b.shape]
    shapes.extend(w.shape for w in model.heads_w)
    shapes.extend(b.shape for b in model.heads_b)
    needed = sum(int(np.prod(s)) for s in shapes)
    if vec.size != needed:
        raise ShapeMismatchError(f"vector has {vec.size} entries, model needs {needed}")
    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(vec[offset:offset + size].reshape(shape).copy())
        offset += size
    n_heads = len(model.heads_w)
    return replace(
        model,
        conv1_w=arrays[0], conv1_b=arrays[1], conv2_w=arrays[2], conv2_b=arrays[3],
        heads_w=tuple(arrays[4:4 + n_heads]),
        heads_b=tuple(arrays[4 + n_heads:4 + 2 * n_heads]),
    )


def grads_to_vector(model: ToyModel, grads: dict) -> np.ndarray:
    """Flatten a gradient dict in the same order as to_vector."""
    parts = [grads["conv1_w"], grads["conv1_b"], grads["conv2_w"], grads["conv2_b"]]
    parts.extend(grads["heads_w"])
    parts.extend(grads["heads_b"])
    return np.concatenate([p.reshape(-1) for p in parts])
