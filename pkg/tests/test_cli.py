"""End-to-end CLI behavior on small synthetic trees."""

import numpy as np
import pytest

from foresee import cli, dataio
from foresee.core import DepthMap, LogitVolume, decode_depthmap, make_binspec
from foresee.fusion import max_merge
from foresee.pointcloud import read_kitti_bin

CALIB_TEXT = "P2: 700.0 0.0 48.0 0.0 0.0 700.0 30.0 0.0 0.0 0.0 1.0 0.0\n"


def _write_depth(path, values, validity=None):
    if validity is None:
        validity = np.ones(values.shape, dtype=bool)
    depth = DepthMap(values=values, validity=validity)
    path.write_bytes(dataio.write_depth_image(depth))


def _label_line(left, top, right, bottom, name="Car"):
    return (f"{name} 0.00 0 -1.58 {left:.2f} {top:.2f} {right:.2f} {bottom:.2f} "
            "1.57 1.65 3.35 -5.1 1.8 20.3 -1.82\n")


@pytest.fixture
def tree(tmp_path):
    """Two-sample dataset: gt, slightly-off predictions, labels, calib."""
    rng = np.random.default_rng(0)
    dirs = {name: tmp_path / name for name in ("gt", "pred", "labels", "calib")}
    for d in dirs.values():
        d.mkdir()
    h, w = 24, 40
    for sample_id in ("000000", "000001"):
        gt_values = np.round(rng.uniform(2.0, 60.0, size=(h, w)) * 256) / 256
        _write_depth(dirs["gt"] / f"{sample_id}.png", gt_values)
        pred_values = np.clip(gt_values * rng.uniform(0.85, 1.15, size=(h, w)), 0.5, 250.0)
        _write_depth(dirs["pred"] / f"{sample_id}.png", pred_values)
        (dirs["labels"] / f"{sample_id}.txt").write_text(
            _label_line(5, 5, 15, 14) + _label_line(20, 8, 30, 20, "Pedestrian")
        )
        (dirs["calib"] / f"{sample_id}.txt").write_text(CALIB_TEXT)
    return dirs


class TestEvaluate:
    def test_perfect_prediction_zero_errors(self, tree, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main([
            "evaluate", "--pred-dir", str(tree["gt"]), "--gt-dir", str(tree["gt"]),
            "--label-dir", str(tree["labels"]), "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        kv = dict(
            line.split(" = ")
            for line in (out / "aggregate.txt").read_text().splitlines()
        )
        assert float(kv["global.absRel"]) == 0.0
        assert float(kv["foreground.delta1"]) == 1.0
        assert (out / "000000.txt").is_file()
        assert (out / "000001.txt").is_file()

    def test_missing_prediction_exit_code(self, tree, tmp_path):
        (tree["pred"] / "000001.png").unlink()
        code = cli.main([
            "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
            "--label-dir", str(tree["labels"]), "--out", str(tmp_path / "out"),
        ])
        assert code == cli.EXIT_MISSING

    def test_malformed_label_exit_code(self, tree, tmp_path):
        (tree["labels"] / "000000.txt").write_text("Car 1 2\n")
        code = cli.main([
            "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
            "--label-dir", str(tree["labels"]), "--out", str(tmp_path / "out"),
        ])
        assert code == cli.EXIT_PARSE

    def test_silog_x100_scales_output(self, tree, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out, flag in ((out_a, []), (out_b, ["--silog-x100"])):
            cli.main([
                "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
                "--label-dir", str(tree["labels"]), "--out", str(out), *flag,
            ])
        plain = dict(l.split(" = ") for l in (out_a / "aggregate.txt").read_text().splitlines())
        scaled = dict(l.split(" = ") for l in (out_b / "aggregate.txt").read_text().splitlines())
        assert float(scaled["global.SILog"]) == pytest.approx(
            100 * float(plain["global.SILog"]), rel=1e-9
        )
        assert scaled["global.absRel"] == plain["global.absRel"]

    def test_jobs_flag_identical_output(self, tree, tmp_path):
        outs = []
        for jobs in ("1", "4"):
            out = tmp_path / f"jobs{jobs}"
            cli.main([
                "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
                "--label-dir", str(tree["labels"]), "--out", str(out), "--jobs", jobs,
            ])
            outs.append((out / "aggregate.txt").read_bytes())
        assert outs[0] == outs[1]

    def test_rerun_byte_identical(self, tree, tmp_path):
        out = tmp_path / "out"
        for _ in range(2):
            cli.main([
                "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
                "--label-dir", str(tree["labels"]), "--out", str(out),
            ])
        first = (out / "aggregate.txt").read_bytes()
        cli.main([
            "evaluate", "--pred-dir", str(tree["pred"]), "--gt-dir", str(tree["gt"]),
            "--label-dir", str(tree["labels"]), "--out", str(out),
        ])
        assert (out / "aggregate.txt").read_bytes() == first


class TestAnalyze:
    def test_gradient_mode_constant_tree(self, tmp_path):
        for name in ("gt", "labels"):
            (tmp_path / name).mkdir()
        _write_depth(tmp_path / "gt" / "000000.png", np.full((16, 16), 10.0))
        (tmp_path / "labels" / "000000.txt").write_text(_label_line(2, 2, 8, 8))
        out = tmp_path / "out"
        code = cli.main([
            "analyze", "--gt-dir", str(tmp_path / "gt"), "--label-dir",
            str(tmp_path / "labels"), "--mode", "gradients", "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        table = (out / "gradient_levels.txt").read_text()
        assert "100.00" in table
        tsv = (out / "gradient_levels.tsv").read_text().splitlines()
        assert tsv[0] == "region\tlevel\tpercent"
        assert len(tsv) == 7

    def test_values_mode_row_per_anchor(self, tree, tmp_path):
        out = tmp_path / "out"
        code = cli.main([
            "analyze", "--gt-dir", str(tree["gt"]), "--label-dir", str(tree["labels"]),
            "--mode", "values", "--out", str(out), "--anchors", "16,32,64",
        ])
        assert code == cli.EXIT_OK
        lines = (out / "depth_value_distribution.tsv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + 3 anchors

    def test_scaling_flag(self, tree, tmp_path):
        for scaling in ("per-image", "global"):
            out = tmp_path / scaling
            code = cli.main([
                "analyze", "--gt-dir", str(tree["gt"]), "--label-dir", str(tree["labels"]),
                "--mode", "gradients", "--out", str(out), "--scaling", scaling,
            ])
            assert code == cli.EXIT_OK


class TestToPointcloud:
    def test_single_pixel_principal_point(self, tmp_path):
        (tmp_path / "depth").mkdir()
        (tmp_path / "calib").mkdir()
        values = np.zeros((60, 90))
        values[30, 48] = 5.0  # at the principal point (c_u=48, c_v=30)
        _write_depth(tmp_path / "depth" / "000000.png", values, validity=values > 0)
        (tmp_path / "calib" / "000000.txt").write_text(CALIB_TEXT)
        out = tmp_path / "out"
        code = cli.main([
            "to-pointcloud", "--depth-dir", str(tmp_path / "depth"),
            "--calib-dir", str(tmp_path / "calib"), "--out", str(out),
            "--format", "bin",
        ])
        assert code == cli.EXIT_OK
        pc = read_kitti_bin((out / "000000.bin").read_bytes())
        np.testing.assert_allclose(pc.points, [[0.0, 0.0, 5.0, 1.0]], atol=1e-6)

    def test_infinite_height_keeps_all_points(self, tree, tmp_path):
        out = tmp_path / "out"
        code = cli.main([
            "to-pointcloud", "--depth-dir", str(tree["gt"]),
            "--calib-dir", str(tree["calib"]), "--out", str(out),
            "--format", "bin", "--max-height", "inf",
        ])
        assert code == cli.EXIT_OK
        data = (out / "000000.bin").read_bytes()
        assert len(data) == 16 * 24 * 40

    def test_ply_output(self, tree, tmp_path):
        out = tmp_path / "out"
        code = cli.main([
            "to-pointcloud", "--depth-dir", str(tree["gt"]),
            "--calib-dir", str(tree["calib"]), "--out", str(out), "--format", "ply",
        ])
        assert code == cli.EXIT_OK
        text = (out / "000000.ply").read_text()
        assert text.startswith("ply\nformat ascii 1.0\n")

    def test_missing_calib(self, tree, tmp_path):
        (tree["calib"] / "000001.txt").unlink()
        code = cli.main([
            "to-pointcloud", "--depth-dir", str(tree["gt"]),
            "--calib-dir", str(tree["calib"]), "--out", str(tmp_path / "out"),
        ])
        assert code == cli.EXIT_MISSING


class TestMerge:
    def _volumes(self, tmp_path):
        rng = np.random.default_rng(1)
        f32 = lambda a: a.astype(np.float32).astype(np.float64)
        p_f = LogitVolume(scores=f32(rng.normal(0, 3, size=(6, 9, 5))))
        p_b = LogitVolume(scores=f32(rng.normal(0, 3, size=(6, 9, 5))))
        fp = tmp_path / "fg.logits"
        bp = tmp_path / "bg.logits"
        fp.write_bytes(dataio.write_logits(p_f))
        bp.write_bytes(dataio.write_logits(p_b))
        return p_f, p_b, fp, bp

    def test_max_mode(self, tmp_path):
        p_f, p_b, fp, bp = self._volumes(tmp_path)
        out = tmp_path / "merged.logits"
        code = cli.main([
            "merge", "--fg-logits", str(fp), "--bg-logits", str(bp),
            "--mode", "max", "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        merged = dataio.read_logits(out.read_bytes())
        np.testing.assert_array_equal(merged.scores, max_merge(p_f, p_b).scores)

    def test_identical_inputs_identity(self, tmp_path):
        p_f, _, fp, _ = self._volumes(tmp_path)
        out = tmp_path / "merged.logits"
        cli.main(["merge", "--fg-logits", str(fp), "--bg-logits", str(fp),
                  "--mode", "max", "--out", str(out)])
        assert out.read_bytes() == fp.read_bytes()

    def test_mask_mode_empty_labels_gives_bg(self, tmp_path):
        _, p_b, fp, bp = self._volumes(tmp_path)
        labels = tmp_path / "000000.txt"
        labels.write_text("")
        out = tmp_path / "merged.logits"
        code = cli.main([
            "merge", "--fg-logits", str(fp), "--bg-logits", str(bp),
            "--mode", "mask", "--labels", str(labels), "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        merged = dataio.read_logits(out.read_bytes())
        np.testing.assert_array_equal(merged.scores, p_b.scores)

    def test_mask_mode_requires_labels(self, tmp_path):
        _, _, fp, bp = self._volumes(tmp_path)
        code = cli.main([
            "merge", "--fg-logits", str(fp), "--bg-logits", str(bp),
            "--mode", "mask", "--out", str(tmp_path / "m.logits"),
        ])
        assert code == cli.EXIT_PARSE

    def test_shape_mismatch_exit_code(self, tmp_path):
        _, _, fp, _ = self._volumes(tmp_path)
        other = tmp_path / "other.logits"
        other.write_bytes(dataio.write_logits(LogitVolume(scores=np.zeros((2, 2, 5)))))
        code = cli.main([
            "merge", "--fg-logits", str(fp), "--bg-logits", str(other),
            "--mode", "max", "--out", str(tmp_path / "m.logits"),
        ])
        assert code == cli.EXIT_SHAPE

    def test_decode_png(self, tmp_path):
        p_f, p_b, fp, bp = self._volumes(tmp_path)
        out = tmp_path / "merged.logits"
        png = tmp_path / "depth.png"
        cli.main([
            "merge", "--fg-logits", str(fp), "--bg-logits", str(bp),
            "--mode", "max", "--out", str(out), "--decode-png", str(png),
            "--d-min", "1.0", "--d-max", "80.0",
        ])
        decoded = dataio.read_depth_image(png.read_bytes())
        spec = make_binspec(1.0, 80.0, 5)
        expected = decode_depthmap(max_merge(p_f, p_b), spec)
        assert np.max(np.abs(decoded.values - expected.values)) <= 1.0 / 512.0


class TestTrainToy:
    CONFIG = (
        "height = 16\nwidth = 24\nnum_bins = 6\nhidden = 4\nsteps = 10\n"
        "lr = 0.05\nlr_decay_step = 8\ntrain_scenes = 2\neval_scenes = 2\n"
        "object_count_min = 1\nobject_count_max = 2\nseed = 13\n"
    )

    def _config_file(self, tmp_path):
        # small objects so tiny scenes can satisfy the foreground window
        path = tmp_path / "toy.cfg"
        path.write_text(self.CONFIG)
        return path

    def test_single_experiment_writes_reports(self, tmp_path, monkeypatch):
        import foresee.toytrain.scenes as scenes_mod
        cfg = self._config_file(tmp_path)
        out = tmp_path / "run"
        code = cli.main([
            "train-toy", "--config", str(cfg), "--experiment", "single",
            "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        assert (out / "config.txt").is_file()
        assert "global.absRel" in (out / "report.txt").read_text()

    def test_sweep_row_count_and_determinism(self, tmp_path):
        cfg = self._config_file(tmp_path)
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli.main([
                "train-toy", "--config", str(cfg), "--experiment", "sweep",
                "--out", str(out), "--lambdas", "0,0.5,1.0",
            ])
            assert code == cli.EXIT_OK
            outputs.append((out / "sweep.tsv").read_bytes())
        assert outputs[0] == outputs[1]
        assert len(outputs[0].decode().strip().splitlines()) == 4  # header + 3

    def test_bad_config_key_exit_code(self, tmp_path):
        cfg = tmp_path / "toy.cfg"
        cfg.write_text("no_such_key = 3\n")
        code = cli.main([
            "train-toy", "--config", str(cfg), "--experiment", "single",
            "--out", str(tmp_path / "out"),
        ])
        assert code == cli.EXIT_PARSE


class TestConfigRoundTrip:
    def test_parse_format_round_trip(self):
        from foresee.toytrain.config import format_config, parse_config
        config = parse_config("steps = 33\nlam_f = 0.3\nobject_count_max = 7\n")
        assert config.steps == 33
        assert config.lam_f == 0.3
        assert config.scene.object_count_range == (2, 7)
        again = parse_config(format_config(config))
        assert again == config

    def test_located_errors(self):
        from foresee.errors import ParseError
        from foresee.toytrain.config import parse_config
        with pytest.raises(ParseError) as err:
            parse_config("steps = 5\nbogus = 1\n", source="x.cfg")
        assert err.value.line == 2
