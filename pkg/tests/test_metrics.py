"""Evaluation metrics and dataset-level pooling."""

import math

import numpy as np
import pytest

from foresee.core import DepthMap, ForegroundMask
from foresee.errors import EmptyRegionError, InvalidRangeError, ShapeMismatchError
from foresee.metrics import (
    aggregate,
    evaluate,
    format_report_kv,
    format_report_text,
)


def _depth(values, validity=None):
    values = np.asarray(values, dtype=np.float64)
    if validity is None:
        validity = np.ones(values.shape, dtype=bool)
    return DepthMap(values=values, validity=np.asarray(validity, dtype=bool))


def _mask(flags):
    return ForegroundMask(flags=np.asarray(flags, dtype=bool))


def _random_scene(rng, h=8, w=10):
    gt = _depth(rng.uniform(2.0, 60.0, size=(h, w)))
    pred = _depth(gt.values * rng.uniform(0.7, 1.4, size=(h, w)))
    fg = _mask(rng.random((h, w)) < 0.3)
    return pred, gt, fg


class TestEvaluate:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        gt = _depth(rng.uniform(1.0, 50.0, size=(5, 5)))
        fg = _mask(rng.random((5, 5)) < 0.5)
        report = evaluate(gt, gt, fg)
        for stats in report.levels.values():
            assert stats.abs_rel == 0.0
            assert stats.sq_rel == 0.0
            assert stats.silog == 0.0
            assert stats.log10 == 0.0
            assert stats.delta1 == 1.0
            assert stats.delta2 == 1.0
            assert stats.delta3 == 1.0

    def test_double_prediction(self):
        """pred = 2*gt: absRel 1, log10 = log10(2), SILog 0 (pure scale),
        and ratio 2 fails even the third threshold (1.25^3 < 2)."""
        rng = np.random.default_rng(1)
        gt = _depth(rng.uniform(1.0, 50.0, size=(6, 6)))
        pred = _depth(2.0 * gt.values)
        report = evaluate(pred, gt, _mask(rng.random((6, 6)) < 0.4))
        for stats in report.levels.values():
            assert stats.abs_rel == pytest.approx(1.0, rel=1e-12)
            assert stats.log10 == pytest.approx(math.log10(2.0), rel=1e-12)
            assert stats.silog == pytest.approx(0.0, abs=1e-12)
            assert stats.delta1 == 0.0
            assert stats.delta2 == 0.0
            assert stats.delta3 == 0.0

    def test_single_pixel_arithmetic(self):
        report = evaluate(_depth([[12.0]]), _depth([[10.0]]), _mask([[True]]))
        fg = report.levels["foreground"]
        assert fg.abs_rel == pytest.approx(0.2, rel=1e-12)
        assert fg.sq_rel == pytest.approx(0.4, rel=1e-12)
        assert fg.delta1 == 1.0  # 1.2 < 1.25
        assert "background" not in report.levels
        assert report.levels["global"].pixel_count == 1

    def test_silog_scale_invariance(self):
        rng = np.random.default_rng(2)
        pred, gt, fg = _random_scene(rng)
        base = evaluate(pred, gt, fg)
        for c in rng.uniform(0.1, 10.0, size=20):
            scaled = evaluate(_depth(c * pred.values), _depth(c * gt.values), fg)
            for name in base.levels:
                assert scaled.levels[name].silog == pytest.approx(
                    base.levels[name].silog, abs=1e-9
                )

    def test_delta_monotone(self):
        rng = np.random.default_rng(3)
        pred, gt, fg = _random_scene(rng)
        for stats in evaluate(pred, gt, fg).levels.values():
            assert stats.delta1 <= stats.delta2 <= stats.delta3

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        pred, gt, fg = _random_scene(rng, 4, 6)
        perm = rng.permutation(24)
        pred_p = _depth(pred.values.reshape(-1)[perm].reshape(4, 6))
        gt_p = _depth(gt.values.reshape(-1)[perm].reshape(4, 6))
        fg_p = _mask(fg.flags.reshape(-1)[perm].reshape(4, 6))
        a = evaluate(pred, gt, fg)
        b = evaluate(pred_p, gt_p, fg_p)
        for name in a.levels:
            for metric in ("absRel", "sqRel", "SILog", "log10", "delta1"):
                assert a.levels[name].metric(metric) == pytest.approx(
                    b.levels[name].metric(metric), rel=1e-12
                )

    def test_fg_bg_partition_global(self):
        """Global sums are exactly fg sums + bg sums (pixel-weighted pooling)."""
        rng = np.random.default_rng(5)
        pred, gt, fg = _random_scene(rng)
        report = evaluate(pred, gt, fg)
        f, b, g = (report.levels[k] for k in ("foreground", "background", "global"))
        assert g.pixel_count == f.pixel_count + b.pixel_count
        assert g.abs_rel_sum == pytest.approx(f.abs_rel_sum + b.abs_rel_sum, rel=1e-12)
        assert g.sq_rel_sum == pytest.approx(f.sq_rel_sum + b.sq_rel_sum, rel=1e-12)
        assert g.log10_sum == pytest.approx(f.log10_sum + b.log10_sum, rel=1e-12)
        assert g.delta1_count == f.delta1_count + b.delta1_count

    def test_invalid_gt_pixels_ignored(self):
        gt = _depth([[10.0, 1.0]], validity=[[True, False]])
        pred = _depth([[10.0, 99.0]])
        report = evaluate(pred, gt, _mask([[False, False]]))
        assert report.levels["global"].pixel_count == 1
        assert report.levels["global"].abs_rel == 0.0

    def test_strict_delta_boundary(self):
        report = evaluate(_depth([[1.25]]), _depth([[1.0]]), _mask([[False]]))
        assert report.levels["global"].delta1 == 0.0  # ratio exactly 1.25 fails '<'

    def test_errors(self):
        with pytest.raises(ShapeMismatchError):
            evaluate(_depth([[1.0]]), _depth([[1.0, 2.0]]), _mask([[True]]))
        with pytest.raises(EmptyRegionError):
            evaluate(_depth([[1.0]]), _depth([[1.0]], validity=[[False]]), _mask([[True]]))
        with pytest.raises(InvalidRangeError):
            evaluate(_depth([[1.0]], validity=[[False]]), _depth([[1.0]]), _mask([[True]]))


class TestAggregate:
    def test_single_report_identity(self):
        rng = np.random.default_rng(6)
        report = evaluate(*_random_scene(rng))
        pooled = aggregate([report])
        for name in report.levels:
            assert pooled.levels[name] == report.levels[name]

    def test_two_identical_reports_same_means(self):
        rng = np.random.default_rng(7)
        report = evaluate(*_random_scene(rng))
        pooled = aggregate([report, report])
        for name in report.levels:
            for metric in ("absRel", "sqRel", "SILog", "log10", "delta1"):
                assert pooled.levels[name].metric(metric) == pytest.approx(
                    report.levels[name].metric(metric), rel=1e-12
                )
            assert pooled.levels[name].pixel_count == 2 * report.levels[name].pixel_count

    def test_pixel_weighted_mean(self):
        r1 = evaluate(_depth([[11.0]]), _depth([[10.0]]), _mask([[False]]))  # err 0.1
        r2 = evaluate(_depth([[13.0]]), _depth([[10.0]]), _mask([[False]]))  # err 0.3
        pooled = aggregate([r1, r2])
        assert pooled.levels["global"].abs_rel == pytest.approx(0.2, rel=1e-12)

    def test_silog_pools_exactly(self):
        """Pooled SILog equals SILog of the concatenated pixel set."""
        rng = np.random.default_rng(8)
        scenes = [_random_scene(rng, 4, 5) for _ in range(3)]
        pooled = aggregate([evaluate(*s) for s in scenes])
        pred_all = np.concatenate([s[0].values.reshape(-1) for s in scenes]).reshape(1, -1)
        gt_all = np.concatenate([s[1].values.reshape(-1) for s in scenes]).reshape(1, -1)
        fg_all = np.concatenate([s[2].flags.reshape(-1) for s in scenes]).reshape(1, -1)
        whole = evaluate(_depth(pred_all), _depth(gt_all), _mask(fg_all))
        for name in whole.levels:
            assert pooled.levels[name].silog == pytest.approx(
                whole.levels[name].silog, rel=1e-12
            )

    def test_empty_list_rejected(self):
        with pytest.raises(EmptyRegionError):
            aggregate([])

    def test_level_absent_in_some_reports(self):
        r_fg = evaluate(_depth([[10.0]]), _depth([[10.0]]), _mask([[True]]))
        r_bg = evaluate(_depth([[10.0]]), _depth([[10.0]]), _mask([[False]]))
        pooled = aggregate([r_fg, r_bg])
        assert pooled.levels["foreground"].pixel_count == 1
        assert pooled.levels["background"].pixel_count == 1
        assert pooled.levels["global"].pixel_count == 2


class TestSerialization:
    def test_kv_schema(self):
        rng = np.random.default_rng(9)
        report = evaluate(*_random_scene(rng))
        text = format_report_kv(report)
        lines = [l for l in text.splitlines() if l]
        assert len(lines) == 3 * 8
        for line in lines:
            key, _, value = line.partition(" = ")
            level, metric = key.split(".")
            assert level in ("foreground", "background", "global")
            float(value)  # parses

    def test_silog_x100_flag(self):
        rng = np.random.default_rng(10)
        report = evaluate(*_random_scene(rng))
        plain = dict(l.split(" = ") for l in format_report_kv(report).splitlines())
        x100 = dict(l.split(" = ") for l in format_report_kv(report, silog_x100=True).splitlines())
        for level in ("foreground", "background", "global"):
            assert float(x100[f"{level}.SILog"]) == pytest.approx(
                100.0 * float(plain[f"{level}.SILog"]), rel=1e-9
            )
            assert x100[f"{level}.absRel"] == plain[f"{level}.absRel"]

    def test_text_table_has_all_levels(self):
        rng = np.random.default_rng(11)
        report = evaluate(*_random_scene(rng))
        text = format_report_text(report)
        for level in ("foreground", "background", "global"):
            assert level in text
