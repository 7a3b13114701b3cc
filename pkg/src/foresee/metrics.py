"""Depth evaluation metrics at foreground / background / global levels.

Each level keeps raw per-pixel sums rather than finished means so that
dataset-level aggregation pools exactly: absRel/sqRel/log10 pool as sums of
per-pixel terms, the delta accuracies as hit counts, and SILog via the sum
and centered second moment of log residuals (combined with the parallel
variance rule, which is algebraically exact and avoids the catastrophic
cancellation a raw sum-of-squares would hit on near-constant residuals).

SILog here is the unitless square root of the full variance of log
residuals, sqrt(mean(d^2) - mean(d)^2) with d = ln(pred) - ln(gt); the
x100 leaderboard convention is a formatting flag, not a different metric.
Delta thresholds compare with strict '<'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DepthMap, ForegroundMask
from .errors import EmptyRegionError, InvalidRangeError, ShapeMismatchError

LEVEL_NAMES = ("foreground", "background", "global")
METRIC_NAMES = ("absRel", "sqRel", "SILog", "log10",
                "delta1", "delta2", "delta3", "pixel_count")


@dataclass(frozen=True)
class LevelStats:
    """Raw sums for one evaluation level; the metrics are derived properties."""

    pixel_count: int
    abs_rel_sum: float
    sq_rel_sum: float
    log10_sum: float
    log_diff_sum: float
    log_diff_m2: float  # sum of squared deviations from the level mean
    delta1_count: int
    delta2_count: int
    delta3_count: int

    @property
    def abs_rel(self) -> float:
        return self.abs_rel_sum / self.pixel_count

    @property
    def sq_rel(self) -> float:
        return self.sq_rel_sum / self.pixel_count

    @property
    def log10(self) -> float:
        return self.log10_sum / self.pixel_count

    @property
    def silog(self) -> float:
        return math.sqrt(max(self.log_diff_m2 / self.pixel_count, 0.0))

    @property
    def delta1(self) -> float:
        return self.delta1_count / self.pixel_count

    @property
    def delta2(self) -> float:
        return self.delta2_count / self.pixel_count

    @property
    def delta3(self) -> float:
        return self.delta3_count / self.pixel_count

    def metric(self, name: str, silog_x100: bool = False) -> float:
        value = {
            "absRel": self.abs_rel, "sqRel": self.sq_rel, "SILog": self.silog,
            "log10": self.log10, "delta1": self.delta1, "delta2": self.delta2,
            "delta3": self.delta3, "pixel_count": float(self.pixel_count),
        }[name]
        if name == "SILog" and silog_x100:
            value *= 100.0
        return value

    @staticmethod
    def combine(parts: list["LevelStats"]) -> "LevelStats":
        n = sum(p.pixel_count for p in parts)
        log_sum = sum(p.log_diff_sum for p in parts)
        # parallel variance: fold the per-part M2 terms plus the between-part
        # correction (n_a*n_b/(n_a+n_b)) * (mean_a - mean_b)^2
        m2 = 0.0
        n_acc = 0
        sum_acc = 0.0
        for p in parts:
            if n_acc == 0:
                m2, n_acc, sum_acc = p.log_diff_m2, p.pixel_count, p.log_diff_sum
                continue
            delta = p.log_diff_sum / p.pixel_count - sum_acc / n_acc
            m2 += p.log_diff_m2 + delta * delta * n_acc * p.pixel_count / (n_acc + p.pixel_count)
            n_acc += p.pixel_count
            sum_acc += p.log_diff_sum
        return LevelStats(
            pixel_count=n,
            abs_rel_sum=sum(p.abs_rel_sum for p in parts),
            sq_rel_sum=sum(p.sq_rel_sum for p in parts),
            log10_sum=sum(p.log10_sum for p in parts),
            log_diff_sum=log_sum,
            log_diff_m2=m2,
            delta1_count=sum(p.delta1_count for p in parts),
            delta2_count=sum(p.delta2_count for p in parts),
            delta3_count=sum(p.delta3_count for p in parts),
        )


@dataclass(frozen=True)
class MetricsReport:
    """Per-level metrics; a level with no pixels is absent from the dict."""

    levels: dict[str, LevelStats]

    def __post_init__(self):
        unknown = set(self.levels) - set(LEVEL_NAMES)
        if unknown:
            raise InvalidRangeError(f"unknown level names: {sorted(unknown)}")


def _level_stats(pred: np.ndarray, gt: np.ndarray) -> LevelStats:
    """Sums over one set of (pred, gt) pixel pairs, both 1-D and positive."""
    diff = pred - gt
    log_diff = np.log(pred) - np.log(gt)
    centered = log_diff - log_diff.mean()
    ratio = np.maximum(pred / gt, gt / pred)
    return LevelStats(
        pixel_count=int(pred.size),
        abs_rel_sum=float(np.sum(np.abs(diff) / gt)),
        sq_rel_sum=float(np.sum(diff * diff / gt)),
        log10_sum=float(np.sum(np.abs(np.log10(pred) - np.log10(gt)))),
        log_diff_sum=float(np.sum(log_diff)),
        log_diff_m2=float(np.sum(centered * centered)),
        delta1_count=int(np.sum(ratio < 1.25)),
        delta2_count=int(np.sum(ratio < 1.25 ** 2)),
        delta3_count=int(np.sum(ratio < 1.25 ** 3)),
    )


def evaluate(pred: DepthMap, gt: DepthMap, fg: ForegroundMask) -> MetricsReport:
    """Evaluate a prediction against ground truth at all three levels.

    Only pixels valid in gt participate; the prediction must be valid and
    positive at every one of them. A level whose pixel set is empty is
    simply absent from the returned report.
    """
    if pred.values.shape != gt.values.shape or fg.flags.shape != gt.values.shape:
        raise ShapeMismatchError(
            f"pred {pred.values.shape}, gt {gt.values.shape}, mask {fg.flags.shape} disagree"
        )
    valid = gt.validity
    if not valid.any():
        raise EmptyRegionError("ground truth has no valid pixels")
    if not pred.validity[valid].all():
        raise InvalidRangeError("prediction is invalid at ground-truth-valid pixels")

    levels: dict[str, LevelStats] = {}
    for name, sel in (
        ("foreground", valid & fg.flags),
        ("background", valid & ~fg.flags),
        ("global", valid),
    ):
        if sel.any():
            levels[name] = _level_stats(
                pred.values[sel].astype(np.float64), gt.values[sel].astype(np.float64)
            )
    return MetricsReport(levels=levels)


def aggregate(reports: list[MetricsReport]) -> MetricsReport:
    """Pixel-weighted pooling of per-image reports into one dataset report."""
    if not reports:
        raise EmptyRegionError("no reports to aggregate")
    levels: dict[str, LevelStats] = {}
    for name in LEVEL_NAMES:
        parts = [r.levels[name] for r in reports if name in r.levels]
        if parts:
            levels[name] = LevelStats.combine(parts)
    return MetricsReport(levels=levels)


def format_report_kv(report: MetricsReport, silog_x100: bool = False) -> str:
    """Machine-readable serialization, one 'level.metric = value' per line."""
    lines = []
    for level in LEVEL_NAMES:
        if level not in report.levels:
            continue
        stats = report.levels[level]
        for name in METRIC_NAMES:
            value = stats.metric(name, silog_x100=silog_x100)
            if name == "pixel_count":
                lines.append(f"{level}.{name} = {int(value)}")
            else:
                lines.append(f"{level}.{name} = {value:.10g}")
    return "\n".join(lines) + "\n"


def format_report_text(report: MetricsReport, silog_x100: bool = False) -> str:
    """Human-oriented table, one row per level."""
    header = f"{'level':<12}" + "".join(f"{m:>12}" for m in METRIC_NAMES)
    lines = [header]
    for level in LEVEL_NAMES:
        if level not in report.levels:
            lines.append(f"{level:<12}{'(no pixels)':>12}")
            continue
        stats = report.levels[level]
        row = f"{level:<12}"
        for name in METRIC_NAMES:
            value = stats.metric(name, silog_x100=silog_x100)
            row += f"{int(value):>12}" if name == "pixel_count" else f"{value:>12.6f}"
        lines.append(row)
    return "\n".join(lines) + "\n"
