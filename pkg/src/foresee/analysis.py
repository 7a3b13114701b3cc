"""Dataset statistics: depth-value windows and depth-gradient levels.

Two views of how foreground and background depth differ. The value
distribution reports, for a list of anchor depths x, the fraction of each
region's pixels whose depth lies in the half-open window (x - width, x]
(half-open so adjacent windows never double count). The gradient
distribution applies the 5-point Laplacian to the depth map, rescales the
magnitudes to [0, 255], and buckets pixels into three uniform levels
(small / medium / large second derivative).

Rescaling is min-max per image by default; a dataset-global mode shares
one scale across all scenes since nothing in the data dictates which
normalization applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DepthMap, ForegroundMask
from .errors import EmptyRegionError, InvalidRangeError, ShapeMismatchError

DEFAULT_WINDOW_WIDTH = 8.0
LEVEL_BOUNDS = (85.0, 170.0)  # uniform thirds of [0, 255]


@dataclass(frozen=True)
class DistributionReport:
    """Per-anchor fraction of region pixels inside the trailing depth window."""

    window_width: float
    anchors: np.ndarray  # (A,) meters, increasing
    fg_fractions: np.ndarray  # (A,) in [0, 1], over the fg pixel population
    bg_fractions: np.ndarray  # (A,) in [0, 1], over the bg pixel population


@dataclass(frozen=True)
class GradientLevelReport:
    """Percentage of pixels at gradient levels I/II/III, per region (sums to 100)."""

    fg_percent: np.ndarray  # (3,)
    bg_percent: np.ndarray  # (3,)


def depth_value_distribution(
    scenes: list[tuple[DepthMap, ForegroundMask]],
    width: float = DEFAULT_WINDOW_WIDTH,
    anchors: np.ndarray | list[float] | None = None,
) -> DistributionReport:
    """Pooled per-region window fractions over a list of scenes."""
    if not scenes:
        raise EmptyRegionError("no scenes supplied")
    if width <= 0:
        raise InvalidRangeError(f"window width must be > 0, got {width}")
    if anchors is None:
        anchors = np.arange(8.0, 88.0, 8.0)
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 1 or anchors.size == 0 or np.any(np.diff(anchors) <= 0):
        raise InvalidRangeError("anchors must be a non-empty increasing sequence")

    fg_depths, bg_depths = [], []
    for depth, fg in scenes:
        if fg.flags.shape != depth.values.shape:
            raise ShapeMismatchError("mask and depth map shapes disagree")
        fg_depths.append(depth.values[depth.validity & fg.flags])
        bg_depths.append(depth.values[depth.validity & ~fg.flags])
    fg_all = np.concatenate(fg_depths)
    bg_all = np.concatenate(bg_depths)
    if fg_all.size == 0 or bg_all.size == 0:
        raise EmptyRegionError("one region has no valid pixels across all scenes")

    def fractions(values: np.ndarray) -> np.ndarray:
        out = np.empty(anchors.size)
        for i, x in enumerate(anchors):
            out[i] = np.mean((values > x - width) & (values <= x))
        return out

    return DistributionReport(
        window_width=float(width), anchors=anchors,
        fg_fractions=fractions(fg_all), bg_fractions=fractions(bg_all),
    )


def laplacian_magnitude(depth: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    """|second derivative| via the 5-point kernel (0,1,0 / 1,-4,1 / 0,1,0).

    Returns (magnitude, valid): a pixel is valid only when it is interior
    and it plus its four neighbors are valid, so missing pixels never leak
    into a neighborhood.
    """
    v = depth.values
    ok = depth.validity
    h, w = v.shape
    mag = np.zeros((h, w), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        raise InvalidRangeError(f"need at least a 3x3 image, got {h}x{w}")
    c = ok[1:-1, 1:-1] & ok[:-2, 1:-1] & ok[2:, 1:-1] & ok[1:-1, :-2] & ok[1:-1, 2:]
    lap = (v[:-2, 1:-1] + v[2:, 1:-1] + v[1:-1, :-2] + v[1:-1, 2:]
           - 4.0 * v[1:-1, 1:-1])
    mag[1:-1, 1:-1] = np.where(c, np.abs(lap), 0.0)
    valid[1:-1, 1:-1] = c
    if not valid.any():
        raise InvalidRangeError("no pixel has a fully valid 5-point neighborhood")
    return mag, valid


def _levels_from_scaled(scaled: np.ndarray) -> np.ndarray:
    """Bucket [0, 255] magnitudes into levels 1..3 (uniform thirds)."""
    levels = np.ones(scaled.shape, dtype=np.uint8)
    levels[scaled >= LEVEL_BOUNDS[0]] = 2
    levels[scaled >= LEVEL_BOUNDS[1]] = 3
    return levels


def _rescale(mag: np.ndarray, valid: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi > lo:
        scaled = (mag - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(mag)
    return np.where(valid, np.clip(scaled, 0.0, 255.0), 0.0)


def laplacian_level_map(depth: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient level in {1, 2, 3} with per-image min-max scaling.

    Returns (levels, valid); entries outside valid are level 1 placeholders.
    """
    mag, valid = laplacian_magnitude(depth)
    vals = mag[valid]
    scaled = _rescale(mag, valid, float(vals.min()), float(vals.max()))
    return _levels_from_scaled(scaled), valid


def gradient_distribution(
    scenes: list[tuple[DepthMap, ForegroundMask]],
    scaling: str = "per-image",
) -> GradientLevelReport:
    """Pooled per-region level percentages across scenes.

    scaling "per-image" rescales each scene's magnitudes independently;
    "global" shares one min/max across the whole list.
    """
    if not scenes:
        raise EmptyRegionError("no scenes supplied")
    if scaling not in ("per-image", "global"):
        raise InvalidRangeError(f"unknown scaling mode {scaling!r}")

    per_scene = [laplacian_magnitude(depth) for depth, _ in scenes]
    if scaling == "global":
        all_vals = np.concatenate([mag[valid] for mag, valid in per_scene])
        lo, hi = float(all_vals.min()), float(all_vals.max())

    fg_counts = np.zeros(3, dtype=np.int64)
    bg_counts = np.zeros(3, dtype=np.int64)
    for (depth, fg), (mag, valid) in zip(scenes, per_scene):
        if fg.flags.shape != depth.values.shape:
            raise ShapeMismatchError("mask and depth map shapes disagree")
        if scaling == "per-image":
            vals = mag[valid]
            lo, hi = float(vals.min()), float(vals.max())
        levels = _levels_from_scaled(_rescale(mag, valid, lo, hi))
        for region_counts, region_sel in (
            (fg_counts, valid & fg.flags),
            (bg_counts, valid & ~fg.flags),
        ):
            region_levels = levels[region_sel]
            for k in (1, 2, 3):
                region_counts[k - 1] += int(np.sum(region_levels == k))

    if fg_counts.sum() == 0 or bg_counts.sum() == 0:
        raise EmptyRegionError("one region has no valid gradient pixels")
    return GradientLevelReport(
        fg_percent=100.0 * fg_counts / fg_counts.sum(),
        bg_percent=100.0 * bg_counts / bg_counts.sum(),
    )


def format_gradient_table(report: GradientLevelReport) -> str:
    """Plain-text table, levels as columns and regions as rows."""
    lines = [f"{'':<12}{'I':>8}{'II':>8}{'III':>8}"]
    for name, row in (("Foreground", report.fg_percent), ("Background", report.bg_percent)):
        lines.append(f"{name:<12}" + "".join(f"{p:>8.2f}" for p in row))
    return "\n".join(lines) + "\n"


def format_distribution_columns(report: DistributionReport) -> str:
    """Columnar output (anchor, fg fraction, bg fraction) for external plotting."""
    lines = ["anchor\tfg_fraction\tbg_fraction"]
    for x, f, b in zip(report.anchors, report.fg_fractions, report.bg_fractions):
        lines.append(f"{x:.6g}\t{f:.6f}\t{b:.6f}")
    return "\n".join(lines) + "\n"
