"""Region-weighted classification losses and their analytic gradients.

All losses here are built from one primitive: the per-pixel softmax
cross-entropy between a logit vector and the quantized depth label. The
separated objective averages that error separately over foreground and
background pixels and blends the two region means with a weight lam:

    L = lam * E_fg + (1 - lam) * E_bg

The branch losses reuse the same form. The foreground branch blends with
lam_f on the foreground mean; the background branch swaps the roles and
puts lam_b on the background mean, which makes it the separated objective
evaluated against the complemented mask.

Because each region mean divides by its own pixel count, a pixel's weight
in the total loss is lam_region / N_region. The gradient of softmax
cross-entropy w.r.t. the logits is (softmax - onehot), so the full backward
pass is that expression scaled by the per-pixel weight. Loss and gradient
share one weight-map helper so the empty-region fallback stays consistent
between them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ForegroundMask, LabelMap, LogitVolume, softmax
from .errors import EmptyRegionError, InvalidRangeError, ShapeMismatchError

DEFAULT_LAMBDA_FG = 0.2
DEFAULT_LAMBDA_BG = 0.2


@dataclass(frozen=True)
class LossWeights:
    """Blend weights for the separated and branch objectives.

    lam drives the single-decoder separated objective; lam_f and lam_b
    drive the foreground and background branch losses (default 0.2 each).
    """

    lam: float = 0.5
    lam_f: float = DEFAULT_LAMBDA_FG
    lam_b: float = DEFAULT_LAMBDA_BG

    def __post_init__(self):
        for name, value in (("lam", self.lam), ("lam_f", self.lam_f), ("lam_b", self.lam_b)):
            if not 0.0 <= value <= 1.0:
                raise InvalidRangeError(f"{name} must lie in [0, 1], got {value}")


def pixel_ce_error(scores: np.ndarray, label: int) -> float:
    """Softmax cross-entropy of one pixel: -ln softmax(scores)[label]."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ShapeMismatchError(f"expected a 1-D score vector, got shape {scores.shape}")
    if not 0 <= label < scores.shape[0]:
        raise InvalidRangeError(f"label {label} out of range [0, {scores.shape[0]})")
    m = scores.max()
    lse = m + np.log(np.sum(np.exp(scores - m)))
    return float(lse - scores[label])


def _check_shapes(volume: LogitVolume, targets: LabelMap, flags: np.ndarray) -> None:
    hw = volume.scores.shape[:2]
    if targets.labels.shape != hw or flags.shape != hw:
        raise ShapeMismatchError(
            f"volume {hw}, targets {targets.labels.shape}, mask {flags.shape} disagree"
        )


def _ce_map(volume: LogitVolume, targets: LabelMap) -> np.ndarray:
    """Per-pixel cross-entropy map; entries at invalid pixels are garbage-free zeros."""
    scores = volume.scores.astype(np.float64)
    m = scores.max(axis=-1, keepdims=True)
    lse = m[..., 0] + np.log(np.sum(np.exp(scores - m), axis=-1))
    labels = np.where(targets.validity, targets.labels, 0)
    if targets.validity.any():
        picked = labels.clip(0, volume.channels - 1)
        if np.any((targets.labels[targets.validity] < 0)
                  | (targets.labels[targets.validity] >= volume.channels)):
            raise InvalidRangeError("labels must lie in [0, C) at valid pixels")
    else:
        picked = labels
    true_score = np.take_along_axis(scores, picked[..., None], axis=-1)[..., 0]
    ce = lse - true_score
    ce[~targets.validity] = 0.0
    return ce


def region_mean_error(volume: LogitVolume, targets: LabelMap, region: np.ndarray) -> float:
    """Mean per-pixel cross-entropy over valid pixels inside a region mask."""
    _check_shapes(volume, targets, region)
    sel = region & targets.validity
    if not sel.any():
        raise EmptyRegionError("region contains no valid pixels")
    return float(_ce_map(volume, targets)[sel].mean())


def _pixel_weight_map(
    validity: np.ndarray, fg_flags: np.ndarray, lam: float
) -> np.ndarray:
    """Per-pixel loss weights lam/N_f (fg) and (1-lam)/N_b (bg).

    If one region is empty the other takes full weight (with a warning);
    scenes without any foreground exist and must not produce NaN.
    """
    fg_valid = validity & fg_flags
    bg_valid = validity & ~fg_flags
    n_f = int(fg_valid.sum())
    n_b = int(bg_valid.sum())
    if n_f == 0 and n_b == 0:
        raise EmptyRegionError("no valid pixels in either region")
    w = np.zeros(validity.shape, dtype=np.float64)
    if n_f == 0:
        warnings.warn("foreground region is empty; background term takes full weight")
        w[bg_valid] = 1.0 / n_b
    elif n_b == 0:
        warnings.warn("background region is empty; foreground term takes full weight")
        w[fg_valid] = 1.0 / n_f
    else:
        w[fg_valid] = lam / n_f
        w[bg_valid] = (1.0 - lam) / n_b
    return w


def separated_objective(
    volume: LogitVolume, targets: LabelMap, fg: ForegroundMask, lam: float
) -> float:
    """lam * mean CE over foreground + (1 - lam) * mean CE over background."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidRangeError(f"lam must lie in [0, 1], got {lam}")
    _check_shapes(volume, targets, fg.flags)
    w = _pixel_weight_map(targets.validity, fg.flags, lam)
    return float(np.sum(w * _ce_map(volume, targets)))


def loss_fg(
    volume_f: LogitVolume, targets: LabelMap, fg: ForegroundMask,
    lam_f: float = DEFAULT_LAMBDA_FG,
) -> float:
    """Foreground-branch loss: lam_f * E_fg + (1 - lam_f) * E_bg."""
    return separated_objective(volume_f, targets, fg, lam_f)


def loss_bg(
    volume_b: LogitVolume, targets: LabelMap, fg: ForegroundMask,
    lam_b: float = DEFAULT_LAMBDA_BG,
) -> float:
    """Background-branch loss: lam_b * E_bg + (1 - lam_b) * E_fg.

    The roles swap relative to the foreground branch, i.e. this is the
    separated objective against the complemented mask.
    """
    return separated_objective(
        volume_b, targets, ForegroundMask(flags=~fg.flags), lam_b
    )


def loss_gradient(
    volume: LogitVolume,
    targets: LabelMap,
    fg: ForegroundMask,
    weights: LossWeights,
    branch: str = "single",
) -> np.ndarray:
    """Analytic d(loss)/d(scores) for the chosen objective.

    branch selects which loss is differentiated: "single" for the separated
    objective (uses weights.lam), "fg" for the foreground-branch loss
    (weights.lam_f), "bg" for the background-branch loss (weights.lam_b).
    Returns an (H, W, C) array; rows at invalid pixels are zero and each
    valid row is weight * (softmax - onehot).
    """
    if branch == "single":
        lam, flags = weights.lam, fg.flags
    elif branch == "fg":
        lam, flags = weights.lam_f, fg.flags
    elif branch == "bg":
        lam, flags = weights.lam_b, ~fg.flags
    else:
        raise InvalidRangeError(f"unknown branch {branch!r}; expected single|fg|bg")
    _check_shapes(volume, targets, flags)
    w = _pixel_weight_map(targets.validity, flags, lam)
    probs = softmax(volume.scores.astype(np.float64), axis=-1)
    grad = probs * w[..., None]
    rows, cols = np.nonzero(targets.validity)
    labels = targets.labels[rows, cols]
    if labels.size and (labels.min() < 0 or labels.max() >= volume.channels):
        raise InvalidRangeError("labels must lie in [0, C) at valid pixels")
    grad[rows, cols, labels] -= w[rows, cols]
    grad[~targets.validity] = 0.0
    return grad
