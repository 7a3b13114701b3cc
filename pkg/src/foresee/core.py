"""Depth quantization and decoding.

Depth estimation is treated as per-pixel classification over C depth bins
that are uniformly spaced in log-depth. This module owns the bin layout
(BinSpec), label assignment, and the soft-weighted-sum decoder that turns
per-bin scores back into metric depth. The shared array-backed domain types
(DepthMap, ForegroundMask, LabelMap, LogitVolume) live here as well so the
loss/fusion/metrics modules can share them without import cycles.

Decoding happens in the log-depth domain: softmax weights average the log
bin centers and the result is exponentiated (a weighted geometric mean).
Since the bins themselves are log-uniform this keeps encode/decode in the
same domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRangeError, ShapeMismatchError

DEFAULT_D_MIN = 1.0
DEFAULT_D_MAX = 80.0
DEFAULT_NUM_BINS = 100


@dataclass(frozen=True)
class BinSpec:
    """Log-uniform quantization of [d_min, d_max] into num_bins classes.

    edges has num_bins+1 entries with edges[0]=d_min, edges[-1]=d_max and
    ln(edges) uniformly spaced; centers[k] is the geometric midpoint
    sqrt(edges[k]*edges[k+1]).
    """

    d_min: float
    d_max: float
    num_bins: int
    edges: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)

    @property
    def log_centers(self) -> np.ndarray:
        return np.log(self.centers)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel metric depth with an explicit validity mask.

    Invalid pixels carry no depth information and are excluded from every
    loss, metric, and statistic downstream.
    """

    values: np.ndarray  # (H, W) float, meters
    validity: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.values.ndim != 2 or self.validity.shape != self.values.shape:
            raise ShapeMismatchError(
                f"depth values {self.values.shape} and validity {self.validity.shape} "
                "must both be (H, W)"
            )
        valid_values = self.values[self.validity]
        if valid_values.size and not (
            np.all(np.isfinite(valid_values)) and np.all(valid_values > 0)
        ):
            raise InvalidRangeError("valid depth values must be finite and > 0")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ForegroundMask:
    """Per-pixel foreground flag (True = inside a labeled object box)."""

    flags: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.flags.ndim != 2 or self.flags.dtype != np.bool_:
            raise ShapeMismatchError("mask flags must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel bin indices (classification targets) with validity."""

    labels: np.ndarray  # (H, W) int
    validity: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.labels.ndim != 2 or self.validity.shape != self.labels.shape:
            raise ShapeMismatchError("labels and validity must both be (H, W)")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class LogitVolume:
    """H x W x C pre-softmax per-bin scores from one decoder branch."""

    scores: np.ndarray  # (H, W, C) float

    def __post_init__(self):
        if self.scores.ndim != 3:
            raise ShapeMismatchError(f"logit scores must be (H, W, C), got {self.scores.shape}")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidRangeError("logit scores must be finite")

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def channels(self) -> int:
        return self.scores.shape[2]


def make_binspec(
    d_min: float = DEFAULT_D_MIN,
    d_max: float = DEFAULT_D_MAX,
    num_bins: int = DEFAULT_NUM_BINS,
) -> BinSpec:
    """Build the log-uniform bin layout over [d_min, d_max]."""
    if not (np.isfinite(d_min) and np.isfinite(d_max)) or not 0 < d_min < d_max:
        raise InvalidRangeError(f"need 0 < d_min < d_max, got [{d_min}, {d_max}]")
    if num_bins < 2:
        raise InvalidRangeError(f"need at least 2 bins, got {num_bins}")
    edges = np.exp(np.linspace(np.log(d_min), np.log(d_max), num_bins + 1))
    # pin the endpoints exactly; linspace already guarantees them in exact
    # arithmetic but not in floating point
    edges[0] = d_min
    edges[-1] = d_max
    centers = np.sqrt(edges[:-1] * edges[1:])
    return BinSpec(d_min=float(d_min), d_max=float(d_max), num_bins=int(num_bins),
                   edges=edges, centers=centers)


def depth_to_label(depth: float, spec: BinSpec) -> int:
    """Quantize one depth into its bin index.

    Depths below d_min clamp to bin 0, depths >= d_max clamp to the last
    bin; ground truth outside the modeled range keeps its pixel rather than
    being dropped.
    """
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidRangeError(f"depth must be finite and > 0, got {depth}")
    k = int(np.searchsorted(spec.edges, depth, side="right")) - 1
    return min(max(k, 0), spec.num_bins - 1)


def quantize_depthmap(depth: DepthMap, spec: BinSpec) -> LabelMap:
    """Vectorized depth_to_label over a whole map; invalid pixels get label 0."""
    labels = np.searchsorted(spec.edges, depth.values, side="right") - 1
    labels = np.clip(labels, 0, spec.num_bins - 1)
    labels[~depth.validity] = 0
    return LabelMap(labels=labels.astype(np.int64), validity=depth.validity.copy())


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Overflow-guarded softmax (max-subtracted)."""
    shifted = scores - np.max(scores, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def decode_soft_weighted_sum(scores: np.ndarray, spec: BinSpec) -> float:
    """Decode one pixel's C scores to metric depth.

    softmax weights average the log bin centers; the exponential of that
    average is the weighted geometric mean of the centers, so the result
    always lies in [centers[0], centers[-1]].
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (spec.num_bins,):
        raise ShapeMismatchError(
            f"expected {spec.num_bins} scores, got shape {scores.shape}"
        )
    if not np.all(np.isfinite(scores)):
        raise InvalidRangeError("scores must be finite")
    w = softmax(scores)
    return float(np.exp(w @ spec.log_centers))


def decode_depthmap(volume: LogitVolume, spec: BinSpec) -> DepthMap:
    """Per-pixel soft-weighted-sum decode of a whole volume; all pixels valid."""
    if volume.channels != spec.num_bins:
        raise ShapeMismatchError(
            f"volume has {volume.channels} channels but spec has {spec.num_bins} bins"
        )
    w = softmax(volume.scores.astype(np.float64), axis=-1)
    depth = np.exp(w @ spec.log_centers)
    return DepthMap(values=depth, validity=np.ones(depth.shape, dtype=bool))
